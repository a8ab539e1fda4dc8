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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsur/data.hpp"
#include "fedsur/model.hpp"
#include "fedsur/params.hpp"

namespace fedsur {

enum class AttackKind { none, cba, dba, neurotoxin, csa, cla };

std::string to_string(AttackKind kind);
/// Throws ConfigError on an unknown name.
AttackKind attack_kind_from_string(const std::string& name);

struct AttackConfig {
  AttackKind kind = AttackKind::none;
  TriggerSpec trigger;
  int malicious_epochs = 5;
  double neurotoxin_ratio = 0.95;  // fraction of coordinates the attacker may touch
  double csa_lambda = 1.0;
  double csa_grad_clip = 1.0;  // alignment-gradient norm cap, in units of lambda; 0 = off
  int cla_top_k = 2;

  /// Throws ConfigError when a field is out of range for a model with
  /// `layer_count` layers.
  void validate(std::size_t layer_count) const;
};

/// Coordinate mask; 1 marks coordinates the attacker may modify.
using Mask = std::vector<std::uint8_t>;

/// Poisoned local training: standard SGD on the already-mixed data set with
/// the malicious epoch count carried by `cfg`.
ParameterVector cba_train(const MlpArchitecture& arch, std::span<const Sample> mixed, const ParameterVector& global,
                          const TrainConfig& cfg);

/// Poisons `clean` with fragment (adversary_index mod fragments) of the
/// trigger, then trains like CBA.
ParameterVector dba_train(const MlpArchitecture& arch, std::span<const Sample> clean, const ParameterVector& global,
                          const TrainConfig& cfg, const TriggerSpec& trigger, double pdr, int adversary_index,
                          std::uint64_t poison_seed);

/// The floor(ratio * P) coordinates with smallest |reference| (ties to the
/// lower index). Without a reference (first round) every one of the
/// `param_count` coordinates is allowed.
Mask neurotoxin_mask(const std::optional<ParameterVector>& reference_delta, double ratio, std::size_t param_count);

/// Resets every off-mask coordinate of `params` to the global value.
void project_to_mask(std::span<double> params, const ParameterVector& global, const Mask& mask);

/// Poisoned SGD with the accumulated delta projected onto `mask` after every step.
ParameterVector neurotoxin_train(const MlpArchitecture& arch, std::span<const Sample> mixed,
                                 const ParameterVector& global, const TrainConfig& cfg, const Mask& mask);

/// lambda * sum over layers of (1 - cos(delta_layer, reference_layer)), and
/// its gradient with respect to the parameters added into `grad`. Layers with
/// a zero-norm delta contribute 1 and no gradient.
double cosine_alignment_loss(const ParameterVector& current, const ParameterVector& global,
                             const ParameterVector& reference_delta, double lambda, std::span<double> grad);

struct CsaResult {
  ParameterVector reference;   // benign model trained on clean data
  ParameterVector backdoored;  // disguised poisoned model
};

/// Trains a benign reference from `global` on clean data with `benign_cfg`, then
/// the backdoor model on `mixed` with the layer-wise cosine penalty toward the
/// reference delta. The penalty gradient grows like 1/|delta| near the start
/// point, so its norm is capped at grad_clip * lambda per step (0 disables).
CsaResult csa_train(const MlpArchitecture& arch, std::span<const Sample> clean, std::span<const Sample> mixed,
                    const ParameterVector& global, const TrainConfig& benign_cfg, const TrainConfig& malicious_cfg,
                    double lambda, double grad_clip = 1.0);

/// Takes the k layers whose backdoored delta is most cosine-aligned with the
/// benign delta (ties in schema order) from `backdoored`; the rest from
/// `benign`. Throws ConfigError if k exceeds the layer count.
ParameterVector cla_compose(const ParameterVector& benign, const ParameterVector& backdoored,
                            const ParameterVector& global, int k);

/// Per-layer cosine between the deltas of `a` and `b` relative to `global`.
std::vector<double> layer_cosines(const ParameterVector& a, const ParameterVector& b, const ParameterVector& global);

}  // namespace fedsur
