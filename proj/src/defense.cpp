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

#include "fedsur/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "fedsur/errors.hpp"

namespace fedsur {

std::string to_string(LcaMode mode) { return mode == LcaMode::top_k ? "top_k" : "mad_threshold"; }
std::string to_string(DonorMetric metric) { return metric == DonorMetric::cosine ? "cosine" : "euclidean"; }

LcaMode lca_mode_from_string(const std::string& name) {
  if (name == "top_k") return LcaMode::top_k;
  if (name == "mad_threshold") return LcaMode::mad_threshold;
  throw ConfigError("unknown LCA mode '" + name + "'");
}

DonorMetric donor_metric_from_string(const std::string& name) {
  if (name == "cosine") return DonorMetric::cosine;
  if (name == "euclidean") return DonorMetric::euclidean;
  throw ConfigError("unknown donor metric '" + name + "'");
}

void LcaConfig::validate() const {
  if (top_k < 1) throw ConfigError("lca top_k must be >= 1");
  if (mode == LcaMode::mad_threshold && !(sigma > 0.0)) throw ConfigError("lca sigma must be positive");
}

void FilterConfig::validate(const LayerSchema& schema) const {
  if (!(zeta > 0.0 && zeta <= 1.0)) throw ConfigError("zeta must be in (0, 1]");
  if (!(iqr_multiplier >= 0.0)) throw ConfigError("iqr_multiplier must be non-negative");
  for (const auto& name : rescue_layers) {
    if (!schema.contains(name)) throw ConfigError("rescue layer '" + name + "' not in schema");
  }
}

std::vector<std::string> FilterConfig::resolved_rescue_layers(const LayerSchema& schema) const {
  if (!rescue_layers.empty()) return rescue_layers;
  auto names = schema.names();
  if (names.size() <= 2) return names;
  return {names[names.size() - 2], names.back()};
}

void AggregationWeights::validate() const {
  if (!(surrogate > 0.0 && surrogate <= rescued && rescued <= trusted)) {
    throw ConfigError("aggregation weights must satisfy 0 < surrogate <= rescued <= trusted");
  }
}

double ScoreMemory::score(int client) const {
  auto it = cumulative.find(client);
  if (it == cumulative.end()) throw std::out_of_range("no score for client " + std::to_string(client));
  return it->second;
}

std::map<std::string, double> layer_divergence(std::span<const ClientUpdate> updates) {
  if (updates.size() < 2) throw std::invalid_argument("layer_divergence: need at least two updates");
  const auto& schema = updates[0].delta.schema();
  for (const auto& u : updates) {
    if (!(u.delta.schema() == schema)) throw SchemaError("layer_divergence: schema mismatch");
  }
  const double n = static_cast<double>(updates.size());
  std::map<std::string, double> out;
  for (const auto& layer : schema.layers()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < updates.size(); ++i) {
      for (std::size_t j = i + 1; j < updates.size(); ++j) {
        sum += cosine_distance(updates[i].delta.layer(layer.name), updates[j].delta.layer(layer.name));
      }
    }
    out[layer.name] = 2.0 * sum / (n * (n - 1.0));
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

LayerSelection select_critical_layers(const std::map<std::string, double>& divergences, const LayerSchema& schema,
                                      const LcaConfig& cfg) {
  cfg.validate();
  if (schema.layer_count() == 0) throw std::invalid_argument("select_critical_layers: empty schema");
  std::vector<double> d;
  for (const auto& layer : schema.layers()) {
    auto it = divergences.find(layer.name);
    if (it == divergences.end()) throw SchemaError("no divergence for layer '" + layer.name + "'");
    d.push_back(it->second);
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), d.size());
  const double med = quantile(d, 0.5);
  LayerSelection sel;
  if (!(med > 0.0)) {
    sel.degenerate = true;
    for (std::size_t i = 0; i < k; ++i) sel.layers.push_back(schema.layers()[i].name);
    return sel;
  }
  std::vector<double> norm(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) norm[i] = d[i] / med;

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norm[a] > norm[b]; });

  if (cfg.mode == LcaMode::top_k) {
    for (std::size_t i = 0; i < k; ++i) sel.layers.push_back(schema.layers()[order[i]].name);
    return sel;
  }
  std::vector<double> abs_dev(norm.size());
  const double norm_med = quantile(norm, 0.5);
  for (std::size_t i = 0; i < norm.size(); ++i) abs_dev[i] = std::abs(norm[i] - norm_med);
  const double threshold = 1.0 + cfg.sigma * quantile(abs_dev, 0.5);
  for (std::size_t i : order) {
    if (norm[i] > threshold) sel.layers.push_back(schema.layers()[i].name);
  }
  // An empty set would leave nothing to cluster on; keep the most divergent layer.
  if (sel.layers.empty()) sel.layers.push_back(schema.layers()[order.front()].name);
  return sel;
}

CoarseSplit coarse_cluster(std::span<const ClientUpdate> updates, std::span<const std::string> critical_layers,
                           const ClusterConfig& cfg) {
  if (critical_layers.empty()) throw std::invalid_argument("coarse_cluster: empty critical layer set");
  if (updates.size() < 2) throw std::invalid_argument("coarse_cluster: need at least two clients");
  CoarseSplit out;
  for (const auto& u : updates) out.features.push_back(gather_layers(u.delta, critical_layers));
  out.distances = pairwise_distance_matrix(out.features);

  const int n = static_cast<int>(updates.size());
  const int majority = n / 2 + 1;
  const int mcs = cfg.min_cluster_size > 0 ? cfg.min_cluster_size : majority;
  const auto result = hdbscan(out.distances, std::max(mcs, 2), cfg.min_samples);
  const auto members = largest_cluster(result);

  std::vector<bool> in_trusted(updates.size(), false);
  if (static_cast<int>(members.size()) >= majority) {
    for (int m : members) in_trusted[static_cast<std::size_t>(m)] = true;
  } else {
    out.degenerate = true;
    std::fill(in_trusted.begin(), in_trusted.end(), true);
  }
  for (std::size_t i = 0; i < updates.size(); ++i) {
    (in_trusted[i] ? out.trusted : out.suspects).push_back(updates[i].client_id);
  }
  return out;
}

std::map<int, double> alignment_scores(std::span<const ClientUpdate> updates, const ParameterVector& global,
                                       std::span<const std::string> rescue_layers) {
  if (updates.empty()) throw std::invalid_argument("alignment_scores: no clients");
  double total = 0.0;
  for (const auto& u : updates) total += u.sample_count;
  if (!(total > 0.0)) throw std::invalid_argument("alignment_scores: sample counts sum to zero");

  const auto base = gather_layers(global, rescue_layers);
  std::vector<std::vector<double>> w;
  for (const auto& u : updates) w.push_back(gather_layers(u.model, rescue_layers));

  std::vector<double> w_star(base.size(), 0.0);
  std::vector<double> g_star(base.size(), 0.0);
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const double omega = updates[i].sample_count / total;
    for (std::size_t k = 0; k < base.size(); ++k) {
      w_star[k] += omega * w[i][k];
      g_star[k] += omega * (w[i][k] - base[k]);
    }
  }
  std::map<int, double> out;
  std::vector<double> dev(base.size());
  for (std::size_t i = 0; i < updates.size(); ++i) {
    for (std::size_t k = 0; k < base.size(); ++k) dev[k] = w[i][k] - w_star[k];
    out[updates[i].client_id] = cosine_similarity(dev, g_star);
  }
  return out;
}

std::string to_string(ScoreOrientation orientation) {
  return orientation == ScoreOrientation::inverted ? "inverted" : "direct";
}

ScoreOrientation score_orientation_from_string(const std::string& name) {
  if (name == "inverted") return ScoreOrientation::inverted;
  if (name == "direct") return ScoreOrientation::direct;
  throw ConfigError("unknown score orientation '" + name + "'");
}

ScoreMemory update_memory(const ScoreMemory& mem, const std::map<int, double>& raw, ScoreOrientation orientation) {
  if (raw.size() < 2) throw std::invalid_argument("update_memory: need at least two scored clients");
  double lo = raw.begin()->second;
  double hi = lo;
  for (const auto& [id, s] : raw) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  ScoreMemory out = mem;
  for (const auto& [id, s] : raw) {
    double anomaly = 0.5;
    if (hi > lo) {
      const double scaled = (s - lo) / (hi - lo);
      anomaly = orientation == ScoreOrientation::inverted ? 1.0 - scaled : scaled;
    }
    const int m = ++out.counts[id];
    const double prev = m > 1 ? out.cumulative[id] : 0.0;
    out.cumulative[id] = (static_cast<double>(m - 1) / m) * prev + (1.0 / m) * anomaly;
  }
  return out;
}

std::vector<int> screen_trusted(const ScoreMemory& mem, std::span<const int> trusted, const FilterConfig& cfg) {
  std::vector<int> demoted;
  if (trusted.size() < 4) return demoted;
  std::vector<double> scores;
  for (int c : trusted) scores.push_back(mem.score(c));
  const double q1 = quantile(scores, 0.25);
  const double q3 = quantile(scores, 0.75);
  const double fence = q3 + cfg.iqr_multiplier * (q3 - q1);
  for (int c : trusted) {
    if (mem.score(c) > fence) demoted.push_back(c);
  }
  return demoted;
}

RescueSplit rescue_suspects(const ScoreMemory& mem, std::span<const int> suspects, const FilterConfig& cfg) {
  RescueSplit out;
  if (suspects.empty()) return out;
  std::vector<double> scores;
  for (int c : suspects) scores.push_back(mem.score(c));
  out.cutoff = std::min(cfg.zeta, quantile(scores, 0.5));
  for (int c : suspects) (mem.score(c) <= out.cutoff ? out.rescued : out.flagged).push_back(c);
  return out;
}

int select_donor(int flagged, std::span<const int> trusted, const DistanceMatrix& distances) {
  if (trusted.empty()) throw NoDonorError("select_donor: empty trusted set");
  int best = -1;
  for (int t : trusted) {
    const double d = distances(static_cast<std::size_t>(flagged), static_cast<std::size_t>(t));
    if (best < 0) {
      best = t;
      continue;
    }
    const double bd = distances(static_cast<std::size_t>(flagged), static_cast<std::size_t>(best));
    if (d < bd || (d == bd && t < best)) best = t;
  }
  return best;
}

ParameterVector build_surrogate(const ParameterVector& flagged, const ParameterVector& donor,
                                std::span<const std::string> critical_layers) {
  if (!flagged.same_schema(donor)) throw SchemaError("build_surrogate: schema mismatch");
  ParameterVector out = flagged;
  for (const auto& name : critical_layers) {
    const auto src = donor.layer(name);
    std::copy(src.begin(), src.end(), out.mutable_layer(name).begin());
  }
  return out;
}

namespace {

double role_weight(AggregationRole role, const AggregationWeights& w) {
  switch (role) {
    case AggregationRole::trusted: return w.trusted;
    case AggregationRole::rescued: return w.rescued;
    case AggregationRole::surrogate: return w.surrogate;
    case AggregationRole::excluded: return 0.0;
  }
  return 0.0;
}

ParameterVector weighted_mean(std::span<const ParameterVector> models, std::span<const double> weights) {
  if (models.empty()) throw std::invalid_argument("aggregate: no models");
  if (weights.size() != models.size()) throw std::invalid_argument("aggregate: weight count mismatch");
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("aggregate: weights sum to zero");
  std::vector<double> acc(models[0].size(), 0.0);
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!models[i].same_schema(models[0])) throw SchemaError("aggregate: schema mismatch");
    if (weights[i] == 0.0) continue;
    const auto v = models[i].values();
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += weights[i] * v[k];
  }
  for (auto& x : acc) x /= total;
  return ParameterVector(models[0].schema_ptr(), std::move(acc));
}

std::vector<int> sorted_union(std::vector<int> a, std::span<const int> b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

}  // namespace

ParameterVector aggregate(std::span<const ParameterVector> models, std::span<const AggregationRole> roles,
                          const AggregationWeights& weights) {
  if (roles.size() != models.size()) throw std::invalid_argument("aggregate: every client needs a role");
  std::vector<double> lambda;
  for (auto r : roles) lambda.push_back(role_weight(r, weights));
  return weighted_mean(models, lambda);
}

ParameterVector fedavg_aggregate(std::span<const ParameterVector> models, std::span<const int> sample_counts) {
  if (sample_counts.size() != models.size()) throw std::invalid_argument("fedavg: sample count mismatch");
  std::vector<double> w(sample_counts.begin(), sample_counts.end());
  return weighted_mean(models, w);
}

RoundOutcome fedsurrogate_round(std::span<const ClientUpdate> updates, const ParameterVector& global,
                                const ScoreMemory& mem, const DefenseConfig& cfg, ScoreMemory& mem_out) {
  if (updates.size() < 2) throw std::invalid_argument("fedsurrogate_round: need at least two clients");
  const auto& schema = global.schema();
  cfg.filter.validate(schema);
  cfg.weights.validate();

  std::map<int, std::size_t> pos;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (!pos.emplace(updates[i].client_id, i).second) throw std::invalid_argument("duplicate client id");
  }

  RoundOutcome out;
  // Stage 1: layer criticality analysis and coarse clustering.
  const auto selection = select_critical_layers(layer_divergence(updates), schema, cfg.lca);
  out.critical_layers = selection.layers;
  auto split = coarse_cluster(updates, out.critical_layers, cfg.cluster);
  out.distance_matrix = split.distances;
  out.degenerate = selection.degenerate || split.degenerate;

  // Stage 2: alignment scoring, memory, bidirectional correction.
  const auto rescue_layers = cfg.filter.resolved_rescue_layers(schema);
  out.raw_scores = alignment_scores(updates, global, rescue_layers);
  mem_out = update_memory(mem, out.raw_scores, cfg.filter.orientation);

  std::vector<int> trusted = split.trusted;
  if (cfg.stages.screen_trusted) out.demoted = screen_trusted(mem_out, trusted, cfg.filter);
  const std::set<int> demoted(out.demoted.begin(), out.demoted.end());
  std::erase_if(trusted, [&](int c) { return demoted.contains(c); });
  out.coarse_trusted = trusted;
  out.suspects = sorted_union(split.suspects, out.demoted);

  if (cfg.stages.rescue) {
    auto rescue = rescue_suspects(mem_out, out.suspects, cfg.filter);
    out.rescued = std::move(rescue.rescued);
    out.confirmed_malicious = std::move(rescue.flagged);
  } else {
    out.confirmed_malicious = out.suspects;
  }
  out.trusted = sorted_union(out.coarse_trusted, out.rescued);

  // Stage 3: surrogate replacement.
  std::vector<ParameterVector> models;
  std::vector<AggregationRole> roles(updates.size(), AggregationRole::trusted);
  for (const auto& u : updates) models.push_back(u.model);
  for (int c : out.rescued) roles[pos.at(c)] = AggregationRole::rescued;

  if (!out.confirmed_malicious.empty()) {
    const bool surrogate = cfg.stages.surrogate && !out.trusted.empty();
    DistanceMatrix donor_distances;
    if (surrogate) {
      donor_distances =
          cfg.donor_metric == DonorMetric::cosine ? split.distances : pairwise_euclidean_matrix(split.features);
    }
    std::vector<int> trusted_pos;
    for (int c : out.trusted) trusted_pos.push_back(static_cast<int>(pos.at(c)));
    for (int f : out.confirmed_malicious) {
      const auto fp = pos.at(f);
      if (!surrogate) {
        roles[fp] = AggregationRole::excluded;
        continue;
      }
      const int donor_pos = select_donor(static_cast<int>(fp), trusted_pos, donor_distances);
      const auto& donor = updates[static_cast<std::size_t>(donor_pos)];
      out.donors[f] = donor.client_id;
      models[fp] = build_surrogate(updates[fp].model, donor.model, out.critical_layers);
      roles[fp] = AggregationRole::surrogate;
    }
  }

  const bool any_weight =
      std::any_of(roles.begin(), roles.end(), [](AggregationRole r) { return r != AggregationRole::excluded; });
  out.global_after = any_weight ? aggregate(models, roles, cfg.weights) : global;
  return out;
}

}  // namespace fedsur
