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

#include "fedsur/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsur/errors.hpp"
#include "fedsur/rng.hpp"

namespace fedsur {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::none: return "none";
    case AttackKind::cba: return "cba";
    case AttackKind::dba: return "dba";
    case AttackKind::neurotoxin: return "neurotoxin";
    case AttackKind::csa: return "csa";
    case AttackKind::cla: return "cla";
  }
  return "none";
}

AttackKind attack_kind_from_string(const std::string& name) {
  for (auto k : {AttackKind::none, AttackKind::cba, AttackKind::dba, AttackKind::neurotoxin, AttackKind::csa,
                 AttackKind::cla}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown attack '" + name + "'");
}

void AttackConfig::validate(std::size_t layer_count) const {
  if (malicious_epochs < 1) throw ConfigError("malicious_epochs must be positive");
  if (!(neurotoxin_ratio > 0.0 && neurotoxin_ratio < 1.0)) throw ConfigError("neurotoxin_ratio must be in (0, 1)");
  if (!(csa_lambda >= 0.0)) throw ConfigError("csa_lambda must be non-negative");
  if (!(csa_grad_clip >= 0.0)) throw ConfigError("csa_grad_clip must be non-negative");
  if (cla_top_k < 0 || static_cast<std::size_t>(cla_top_k) > layer_count) {
    throw ConfigError("cla_top_k must be in [0, layer count]");
  }
}

ParameterVector cba_train(const MlpArchitecture& arch, std::span<const Sample> mixed, const ParameterVector& global,
                          const TrainConfig& cfg) {
  return local_train(arch, global, mixed, cfg);
}

ParameterVector dba_train(const MlpArchitecture& arch, std::span<const Sample> clean, const ParameterVector& global,
                          const TrainConfig& cfg, const TriggerSpec& trigger, double pdr, int adversary_index,
                          std::uint64_t poison_seed) {
  if (adversary_index < 0) throw std::invalid_argument("dba_train: negative adversary index");
  const int fragment = adversary_index % trigger.fragments;
  const auto mixed = poison_partition(clean, pdr, trigger, fragment, poison_seed);
  return local_train(arch, global, mixed, cfg);
}

Mask neurotoxin_mask(const std::optional<ParameterVector>& reference_delta, double ratio,
                     std::size_t param_count) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("neurotoxin_mask: ratio must be in (0, 1)");
  if (!reference_delta) return Mask(param_count, 1);
  const auto ref = reference_delta->values();
  if (ref.size() != param_count) throw std::invalid_argument("neurotoxin_mask: reference size mismatch");
  const auto keep = static_cast<std::size_t>(floor_fraction(ratio, static_cast<long>(ref.size())));
  std::vector<std::size_t> order(ref.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(ref[a]) < std::abs(ref[b]); });
  Mask mask(ref.size(), 0);
  for (std::size_t k = 0; k < keep; ++k) mask[order[k]] = 1;
  return mask;
}

void project_to_mask(std::span<double> params, const ParameterVector& global, const Mask& mask) {
  const auto g = global.values();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!mask[i]) params[i] = g[i];
  }
}

ParameterVector neurotoxin_train(const MlpArchitecture& arch, std::span<const Sample> mixed,
                                 const ParameterVector& global, const TrainConfig& cfg, const Mask& mask) {
  if (mask.size() != global.size()) throw std::invalid_argument("neurotoxin_train: mask size mismatch");
  TrainHooks hooks;
  if (std::find(mask.begin(), mask.end(), std::uint8_t{0}) != mask.end()) {
    hooks.post_step = [&](std::span<double> p) { project_to_mask(p, global, mask); };
  }
  return local_train(arch, global, mixed, cfg, hooks);
}

double cosine_alignment_loss(const ParameterVector& current, const ParameterVector& global,
                             const ParameterVector& reference_delta, double lambda, std::span<double> grad) {
  double loss = 0.0;
  const auto cur = current.values();
  const auto glob = global.values();
  const auto ref = reference_delta.values();
  for (const auto& layer : current.schema().layers()) {
    std::vector<double> x(layer.length);
    for (std::size_t i = 0; i < layer.length; ++i) x[i] = cur[layer.offset + i] - glob[layer.offset + i];
    const auto r = ref.subspan(layer.offset, layer.length);

    const double xx = dot(x, x);
    const double rr = dot(r, r);
    const double nx = std::sqrt(xx);
    const double nr = std::sqrt(rr);
    if (nx < kZeroNorm || nr < kZeroNorm) {
      loss += lambda;
      continue;
    }
    const double xr = dot(x, r);
    const double cos = xr / std::sqrt(xx * rr);
    loss += lambda * (1.0 - cos);
    if (grad.empty() || lambda == 0.0) continue;
    // d/dx (1 - x.r / (|x||r|)) = -(r / (|x||r|) - (x.r) x / (|x|^3 |r|))
    const double a = 1.0 / (nx * nr);
    const double b = xr / (xx * nx * nr);
    for (std::size_t i = 0; i < layer.length; ++i) grad[layer.offset + i] -= lambda * (a * r[i] - b * x[i]);
  }
  return loss;
}

CsaResult csa_train(const MlpArchitecture& arch, std::span<const Sample> clean, std::span<const Sample> mixed,
                    const ParameterVector& global, const TrainConfig& benign_cfg, const TrainConfig& malicious_cfg,
                    double lambda, double grad_clip) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("csa_train: lambda must be non-negative");
  if (!(grad_clip >= 0.0)) throw std::invalid_argument("csa_train: grad_clip must be non-negative");
  CsaResult out;
  out.reference = local_train(arch, global, clean, benign_cfg);
  const auto ref_delta = compute_update(out.reference, global);
  TrainHooks hooks;
  if (lambda > 0.0) {
    std::vector<double> extra(global.size());
    hooks.extra_loss = [&, extra](const ParameterVector& current, std::span<double> grad) mutable {
      std::fill(extra.begin(), extra.end(), 0.0);
      cosine_alignment_loss(current, global, ref_delta, lambda, extra);
      double scale = 1.0;
      if (grad_clip > 0.0) {
        const double norm = l2_norm(extra);
        const double cap = grad_clip * lambda;
        if (norm > cap) scale = cap / norm;
      }
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += scale * extra[i];
    };
  }
  out.backdoored = local_train(arch, global, mixed, malicious_cfg, hooks);
  return out;
}

std::vector<double> layer_cosines(const ParameterVector& a, const ParameterVector& b, const ParameterVector& global) {
  const auto da = compute_update(a, global);
  const auto db = compute_update(b, global);
  std::vector<double> out;
  for (const auto& layer : a.schema().layers()) out.push_back(cosine_similarity(da.layer(layer.name), db.layer(layer.name)));
  return out;
}

ParameterVector cla_compose(const ParameterVector& benign, const ParameterVector& backdoored,
                            const ParameterVector& global, int k) {
  const auto& layers = benign.schema().layers();
  if (k < 0 || static_cast<std::size_t>(k) > layers.size()) throw ConfigError("cla_compose: k exceeds layer count");
  if (!benign.same_schema(backdoored)) throw SchemaError("cla_compose: schema mismatch");
  const auto cos = layer_cosines(backdoored, benign, global);
  std::vector<std::size_t> order(layers.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return cos[x] > cos[y]; });

  ParameterVector out = benign;
  auto dst = out.mutable_values();
  const auto src = backdoored.values();
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const auto& l = layers[order[i]];
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(l.offset), l.length,
                dst.begin() + static_cast<std::ptrdiff_t>(l.offset));
  }
  return out;
}

}  // namespace fedsur
