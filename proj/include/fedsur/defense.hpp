/*
 * Copyright (c) 2026, The fedsur Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsur/clustering.hpp"
#include "fedsur/params.hpp"

namespace fedsur {

enum class LcaMode { top_k, mad_threshold };
enum class DonorMetric { cosine, euclidean };

std::string to_string(LcaMode mode);
std::string to_string(DonorMetric metric);
LcaMode lca_mode_from_string(const std::string& name);
DonorMetric donor_metric_from_string(const std::string& name);

/// Layer criticality analysis settings.
struct LcaConfig {
  int top_k = 5;
  double sigma = 1.0;  // MAD multiplier, mad_threshold mode only
  LcaMode mode = LcaMode::top_k;

  void validate() const;
};

/// How a round's min-max scaled alignment score enters the memory.
/// inverted: 1 - minmax(s), so clients opposing the reference direction score
/// high. direct: minmax(s), so clients pushing further along it score high.
enum class ScoreOrientation { inverted, direct };

std::string to_string(ScoreOrientation orientation);
ScoreOrientation score_orientation_from_string(const std::string& name);

/// Stage-2 filter settings. An empty rescue_layers list means "the last two
/// layers of the schema".
struct FilterConfig {
  double zeta = 0.4;
  ScoreOrientation orientation = ScoreOrientation::direct;
  double iqr_multiplier = 1.5;
  std::vector<std::string> rescue_layers;

  void validate(const LayerSchema& schema) const;
  std::vector<std::string> resolved_rescue_layers(const LayerSchema& schema) const;
};

/// Differential aggregation weights: 1 for trusted, gamma_s for rescued,
/// gamma_r for surrogate-replaced clients.
struct AggregationWeights {
  double trusted = 1.0;
  double rescued = 0.7;
  double surrogate = 0.3;

  void validate() const;
};

/// Coarse clustering settings.
struct ClusterConfig {
  int min_samples = 5;
  /// 0 means floor(N / 2) + 1.
  int min_cluster_size = 0;
};

/// Pipeline switches used by the ablation study. The full pipeline has all on.
struct StageSwitches {
  bool screen_trusted = true;  // IQR demotion from the coarse trusted set
  bool rescue = true;          // rescue of low-anomaly suspects
  bool surrogate = true;       // false: flagged clients are excluded instead

  bool operator==(const StageSwitches&) const = default;
};

struct DefenseConfig {
  LcaConfig lca;
  FilterConfig filter;
  AggregationWeights weights;
  ClusterConfig cluster;
  DonorMetric donor_metric = DonorMetric::cosine;
  StageSwitches stages;
};

/// Persistent per-client anomaly memory: the running mean of every per-round
/// anomaly score a client has received, and the number of rounds it was scored.
struct ScoreMemory {
  std::map<int, double> cumulative;
  std::map<int, int> counts;

  double score(int client) const;
  bool operator==(const ScoreMemory&) const = default;
};

enum class AggregationRole { trusted, rescued, surrogate, excluded };

struct RoundOutcome {
  std::vector<std::string> critical_layers;
  DistanceMatrix distance_matrix;
  std::vector<int> coarse_trusted;       // after demotion
  std::vector<int> suspects;             // Stage-1 suspects plus demoted clients
  std::vector<int> demoted;
  std::vector<int> rescued;
  std::vector<int> confirmed_malicious;
  std::vector<int> trusted;              // coarse_trusted + rescued
  std::map<int, int> donors;             // flagged client -> donor
  std::map<int, double> raw_scores;
  bool degenerate = false;
  ParameterVector global_after;
};

/// Mean pairwise cosine distance of the client deltas, per layer in schema order.
std::map<std::string, double> layer_divergence(std::span<const ClientUpdate> updates);

struct LayerSelection {
  std::vector<std::string> layers;
  bool degenerate = false;  // median divergence was zero
};

/// Normalises by the median divergence and keeps the top-k (ties in schema
/// order, returned in rank order) or every layer above 1 + sigma * MAD.
LayerSelection select_critical_layers(const std::map<std::string, double>& divergences, const LayerSchema& schema,
                                      const LcaConfig& cfg);

struct CoarseSplit {
  std::vector<int> trusted;   // T_c (client ids)
  std::vector<int> suspects;  // S
  DistanceMatrix distances;   // cosine distances over the critical-layer features
  std::vector<std::vector<double>> features;
  bool degenerate = false;    // no majority cluster; everyone trusted
};

CoarseSplit coarse_cluster(std::span<const ClientUpdate> updates, std::span<const std::string> critical_layers,
                           const ClusterConfig& cfg = {});

/// Raw alignment of each client's deviation from the weighted mean model with
/// the weighted mean update, over the rescue layers. Keyed by client id.
std::map<int, double> alignment_scores(std::span<const ClientUpdate> updates, const ParameterVector& global,
                                       std::span<const std::string> rescue_layers);

/// Folds one round of raw scores into memory as a running mean of the
/// min-max scaled, oriented score (0.5 for everyone when all raw scores tie).
ScoreMemory update_memory(const ScoreMemory& mem, const std::map<int, double>& raw,
                          ScoreOrientation orientation = ScoreOrientation::direct);

/// Linear-interpolation quantile (numpy "linear") of an unsorted sample.
double quantile(std::vector<double> values, double q);

/// Trusted clients whose memory score exceeds q3 + m * (q3 - q1). Needs at
/// least four clients, otherwise nothing is demoted.
std::vector<int> screen_trusted(const ScoreMemory& mem, std::span<const int> trusted, const FilterConfig& cfg);

struct RescueSplit {
  std::vector<int> rescued;
  std::vector<int> flagged;
  double cutoff = 0.0;
};

/// cutoff = min(zeta, median of suspect scores); suspects at or below it are rescued.
RescueSplit rescue_suspects(const ScoreMemory& mem, std::span<const int> suspects, const FilterConfig& cfg);

/// Nearest trusted client to `flagged` (positions index into `distances`),
/// ties to the lower position. Throws NoDonorError on an empty trusted set.
int select_donor(int flagged, std::span<const int> trusted, const DistanceMatrix& distances);

/// Copy of `flagged` with the critical layers taken from `donor`.
ParameterVector build_surrogate(const ParameterVector& flagged, const ParameterVector& donor,
                                std::span<const std::string> critical_layers);

/// Role-weighted mean (excluded clients get weight 0).
ParameterVector aggregate(std::span<const ParameterVector> models, std::span<const AggregationRole> roles,
                          const AggregationWeights& weights);

/// Sample-size weighted mean.
ParameterVector fedavg_aggregate(std::span<const ParameterVector> models, std::span<const int> sample_counts);

/// One full defended aggregation round. `mem` is the score memory carried
/// between rounds; the updated memory is returned through `mem_out`.
RoundOutcome fedsurrogate_round(std::span<const ClientUpdate> updates, const ParameterVector& global,
                                const ScoreMemory& mem, const DefenseConfig& cfg, ScoreMemory& mem_out);

}  // namespace fedsur
