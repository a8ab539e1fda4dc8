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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedsur/attacks.hpp"
#include "fedsur/defense.hpp"
#include "fedsur/metrics.hpp"

namespace fedsur {

enum class DefenseKind { fedsurrogate, fedavg };
enum class DatasetSource { synthetic, idx };

std::string to_string(DefenseKind kind);
DefenseKind defense_kind_from_string(const std::string& name);

struct DatasetSpec {
  DatasetSource source = DatasetSource::synthetic;
  int num_classes = 4;
  std::size_t dim = 64;
  std::size_t train_per_class = 15000;
  std::size_t test_per_class = 200;
  double spread = 0.1;
  std::string train_images, train_labels, test_images, test_labels;  // idx only
  std::size_t max_train = 0;  // 0 = all; idx only
  std::size_t max_test = 0;
};

/// Full description of one simulated federation. Defaults are the desk-scale
/// operating point.
struct ExperimentConfig {
  int n_clients = 20;
  double mcr = 0.2;
  double pdr = 0.3;
  double alpha = 0.5;
  int rounds = 30;
  int benign_epochs = 2;
  double lr = 0.05;
  int batch = 32;
  std::vector<std::size_t> hidden = {32, 16};
  AttackConfig attack;       // trigger.patch_coords empty = default 3x3 lower-right patch;
                             // trigger.fragments 0 = min(#malicious, 4)
  DefenseKind defense = DefenseKind::fedsurrogate;
  DefenseConfig defense_cfg;
  DatasetSpec dataset;
  std::uint64_t seed = 1;

  ExperimentConfig() { attack.trigger.fragments = 0; }

  int malicious_count() const;
  bool honest_majority_violated() const { return 2 * malicious_count() >= n_clients; }
  /// Throws ConfigError describing the first invalid field.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// FNV-1a of the canonical JSON dump.
std::string config_hash(const ExperimentConfig& cfg);

struct RoundRecord {
  int round = 0;
  double mta = 0.0;
  double asr = 0.0;
  int n_flagged = 0;
  int n_rescued = 0;
  bool degenerate = false;
  std::vector<std::string> critical_layers;
  DetectionTally detection;  // this round only

  bool operator==(const RoundRecord&) const = default;
};

struct RunReport {
  nlohmann::json config;  // resolved config echo
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string label;      // variant name for sweeps and ablations
  std::vector<RoundRecord> rounds;
  DetectionTally detection;
  std::optional<double> tpr;
  std::optional<double> fpr;
  double mcc = 0.0;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> warnings;

  double final_mta() const { return rounds.empty() ? 0.0 : rounds.back().mta; }
  double final_asr() const { return rounds.empty() ? 0.0 : rounds.back().asr; }

  bool operator==(const RunReport&) const = default;
};

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

struct RunOptions {
  int threads = 0;  // <= 0: OpenMP default
  bool serial = false;  // use the single-threaded reference trainer
  /// Called after each FedSurrogate aggregation with the 1-based round.
  std::function<void(int, const RoundOutcome&)> observer;
};

/// Runs the configured federation end to end.
RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Applies `value` (parsed as JSON if possible, else taken as a string) to the
/// named field. Names are either sweep aliases (zeta, mcr, n_clients,
/// donor_metric, ...) or JSON pointers into the config ("/defense_cfg/filter/zeta").
/// Throws ConfigError for unknown names.
ExperimentConfig with_parameter(const ExperimentConfig& cfg, const std::string& name, const std::string& value);

/// One run per value, all from the same base seed.
std::vector<RunReport> sweep(const ExperimentConfig& cfg, const std::string& parameter,
                             const std::vector<std::string>& values, const RunOptions& opts = {});

/// Stage-ablation variants a (stage 1 only), b (+ screening), c (+ rescue,
/// exclusion), d (full pipeline), all with the same seed.
std::vector<ExperimentConfig> ablation_variants(const ExperimentConfig& cfg);
std::vector<RunReport> ablate(const ExperimentConfig& cfg, const RunOptions& opts = {});

enum class ReportFormat { csv, json };

std::string report_csv(const RunReport& report);
/// Writes the report; throws std::runtime_error on I/O failure.
void emit_report(const RunReport& report, const std::filesystem::path& path, ReportFormat format);

/// Directory named by FEDSUR_OUTPUT_DIR, or `fallback`.
std::filesystem::path output_directory(const std::filesystem::path& fallback);

}  // namespace fedsur
