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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fedsur/attacks.hpp"
#include "fedsur/data.hpp"
#include "fedsur/defense.hpp"
#include "fedsur/errors.hpp"
#include "fedsur/metrics.hpp"
#include "fedsur/model.hpp"
#include "test_util.hpp"

namespace fedsur {
namespace {

struct Fixture {
  Dataset data = generate_synthetic(4, 64, 60, 0.1, 31);
  MlpArchitecture arch = MlpArchitecture::desk_default(64, 4);
  ParameterVector global = init_model(arch, 5);
  TriggerSpec trigger = default_trigger(64);
  TrainConfig benign{2, 0.05, 32, 11};
  TrainConfig malicious{5, 0.05, 32, 11};
  std::vector<Sample> mixed = poison_partition(data.samples, 0.3, trigger, std::nullopt, 3);
};

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

TEST(AttackConfig, Validation) {
  AttackConfig cfg;
  EXPECT_NO_THROW(cfg.validate(3));
  auto bad = cfg;
  bad.neurotoxin_ratio = 1.0;
  EXPECT_THROW(bad.validate(3), ConfigError);
  bad = cfg;
  bad.cla_top_k = 4;
  EXPECT_THROW(bad.validate(3), ConfigError);
  bad = cfg;
  bad.csa_lambda = -1.0;
  EXPECT_THROW(bad.validate(3), ConfigError);
  EXPECT_EQ(attack_kind_from_string("neurotoxin"), AttackKind::neurotoxin);
  EXPECT_THROW(attack_kind_from_string("lp"), ConfigError);
}

TEST(Cba, ZeroPdrIsBenignTraining) {
  Fixture f;
  auto clean_mix = poison_partition(f.data.samples, 0.0, f.trigger, std::nullopt, 3);
  EXPECT_EQ(cba_train(f.arch, clean_mix, f.global, f.benign), local_train(f.arch, f.global, f.data.samples, f.benign));
}

TEST(Cba, PoisonedModelKeepsCleanAccuracy) {
  // A desk-scale malicious shard starting from a partly trained global model.
  Fixture f;
  const auto pool = generate_synthetic(4, 64, 1000, 0.1, 32);
  const auto shard = generate_synthetic(4, 64, 750, 0.1, 33);
  const auto test = generate_synthetic(4, 64, 200, 0.1, 34);
  const auto global = local_train(f.arch, f.global, pool.samples, {1, 0.05, 32, 12});
  const auto mixed = poison_partition(shard.samples, 0.3, f.trigger, std::nullopt, 3);
  auto poisoned = cba_train(f.arch, mixed, global, f.malicious);
  auto twin = local_train(f.arch, global, shard.samples, f.malicious);
  EXPECT_NEAR(evaluate(f.arch, poisoned, test.samples), evaluate(f.arch, twin, test.samples), 0.10);
}

TEST(Dba, SingleFragmentEqualsCba) {
  Fixture f;
  auto mixed = poison_partition(f.data.samples, 0.3, f.trigger, 0, 8);
  EXPECT_EQ(dba_train(f.arch, f.data.samples, f.global, f.malicious, f.trigger, 0.3, 2, 8),
            cba_train(f.arch, mixed, f.global, f.malicious));
}

TEST(Dba, AdversariesUseDisjointFragments) {
  auto spec = default_trigger(64, 2);
  Sample blank{std::vector<double>(64, 0.0), 0};
  auto a = apply_trigger(blank, spec, 0 % spec.fragments);
  auto b = apply_trigger(blank, spec, 1 % spec.fragments);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_FALSE(a.features[i] == 1.0 && b.features[i] == 1.0);
}

TEST(Dba, FullTriggerBeatsEveryFragmentUndefended) {
  // Small undefended federation: 10 clients, 3 DBA adversaries, 4 fragments.
  auto ds = generate_synthetic(4, 64, 300, 0.1, 41);
  auto [train, test] = split_per_class(ds, 200);
  MlpArchitecture arch = MlpArchitecture::desk_default(64, 4);
  auto spec = default_trigger(64, 3);
  auto plan = dirichlet_partition(train, 10, 0.5, 42);
  std::vector<std::vector<Sample>> parts;
  for (const auto& idx : plan.client_indices) parts.push_back(train.subset(idx).samples);
  auto global = init_model(arch, 43);
  for (int round = 0; round < 20; ++round) {
    std::vector<ParameterVector> models;
    std::vector<int> counts;
    for (int c = 0; c < 10; ++c) {
      const auto seed = static_cast<std::uint64_t>(1000 * round + c);
      if (c < 3) {
        models.push_back(dba_train(arch, parts[c], global, {5, 0.05, 32, seed}, spec, 0.3, c, 77 + c));
      } else {
        models.push_back(local_train(arch, global, parts[c], {2, 0.05, 32, seed}));
      }
      counts.push_back(static_cast<int>(parts[c].size()));
    }
    global = fedavg_aggregate(models, counts);
  }
  const double full = asr(arch, global, test.samples, spec);
  for (int k = 0; k < spec.fragments; ++k) {
    TriggerSpec frag = spec;
    frag.patch_coords = spec.fragment_coords(k);
    frag.fragments = 1;
    EXPECT_GT(full, asr(arch, global, test.samples, frag)) << "fragment " << k;
  }
}

TEST(NeurotoxinMask, ReferenceCases) {
  auto s = testing::make_schema({{"w", 4}});
  auto ref = testing::make_vector(s, {5, 1, 3, 2});
  EXPECT_EQ(neurotoxin_mask(ref, 0.5, 4), (Mask{0, 1, 0, 1}));
  EXPECT_EQ(neurotoxin_mask(testing::make_vector(s, {-5, 1, -3, -2}), 0.5, 4), (Mask{0, 1, 0, 1}));
  EXPECT_EQ(neurotoxin_mask(ref, 0.1, 4), (Mask{0, 0, 0, 0}));
  EXPECT_EQ(neurotoxin_mask(testing::make_vector(s, {2, 2, 2, 2}), 0.5, 4), (Mask{1, 1, 0, 0}));
  EXPECT_EQ(neurotoxin_mask(std::nullopt, 0.5, 4), (Mask{1, 1, 1, 1}));
  EXPECT_THROW(neurotoxin_mask(ref, 1.0, 4), std::invalid_argument);
}

TEST(NeurotoxinMask, SortAndTakeOracleProperty) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = static_cast<std::size_t>(testing::random_int(rng, 1, 60));
    auto s = testing::make_schema({{"w", p}});
    std::vector<double> vals(p);
    // Coarse grid so ties occur.
    for (auto& v : vals) v = testing::random_int(rng, -4, 4);
    const double ratio = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    auto mask = neurotoxin_mask(testing::make_vector(s, vals), ratio, p);
    const auto keep = static_cast<std::size_t>(std::floor(ratio * p + 1e-9));
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < p; ++i) order.emplace_back(std::abs(vals[i]), i);
    std::sort(order.begin(), order.end());
    Mask expected(p, 0);
    for (std::size_t k = 0; k < keep; ++k) expected[order[k].second] = 1;
    EXPECT_EQ(mask, expected);
  }
}

TEST(Neurotoxin, OffMaskDeltaIsZero) {
  Fixture f;
  auto cba = cba_train(f.arch, f.mixed, f.global, f.malicious);
  auto mask = neurotoxin_mask(compute_update(cba, f.global), 0.25, f.global.size());
  auto trained = neurotoxin_train(f.arch, f.mixed, f.global, f.malicious, mask);
  double off_nt = 0.0;
  double off_cba = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) continue;
    EXPECT_EQ(trained[i], f.global[i]);
    off_nt += std::pow(trained[i] - f.global[i], 2);
    off_cba += std::pow(cba[i] - f.global[i], 2);
  }
  EXPECT_EQ(off_nt, 0.0);
  EXPECT_GT(off_cba, 0.0);
}

TEST(Neurotoxin, AllTrueMaskEqualsCba) {
  Fixture f;
  Mask all(f.global.size(), 1);
  EXPECT_EQ(neurotoxin_train(f.arch, f.mixed, f.global, f.malicious, all),
            cba_train(f.arch, f.mixed, f.global, f.malicious));
}

TEST(Neurotoxin, ProjectionIdempotentProperty) {
  std::mt19937_64 rng(52);
  auto s = testing::make_schema({{"w", 30}});
  for (int trial = 0; trial < 100; ++trial) {
    auto global = testing::make_vector(s, testing::random_values(rng, 30));
    auto params = testing::random_values(rng, 30);
    Mask mask(30);
    for (auto& m : mask) m = static_cast<std::uint8_t>(testing::random_int(rng, 0, 1));
    project_to_mask(params, global, mask);
    auto once = params;
    project_to_mask(params, global, mask);
    EXPECT_EQ(params, once);
  }
}

TEST(CosineAlignmentLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(53);
  auto s = testing::make_schema({{"a", 5}, {"b", 3}});
  for (int trial = 0; trial < 5; ++trial) {
    auto global = testing::make_vector(s, testing::random_values(rng, 8));
    auto cur = testing::make_vector(s, testing::random_values(rng, 8));
    auto ref = testing::make_vector(s, testing::random_values(rng, 8));
    std::vector<double> grad(8, 0.0);
    cosine_alignment_loss(cur, global, ref, 1.7, grad);
    for (std::size_t i = 0; i < 8; ++i) {
      auto plus = cur;
      auto minus = cur;
      plus.mutable_values()[i] += 1e-6;
      minus.mutable_values()[i] -= 1e-6;
      std::vector<double> none;
      const double fd = (cosine_alignment_loss(plus, global, ref, 1.7, none) -
                         cosine_alignment_loss(minus, global, ref, 1.7, none)) /
                        2e-6;
      EXPECT_NEAR(grad[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(CosineAlignmentLoss, ZeroNormLayerContributesOneWithoutGradient) {
  auto s = testing::make_schema({{"a", 2}, {"b", 2}});
  auto global = testing::make_vector(s, {1, 1, 1, 1});
  auto cur = testing::make_vector(s, {1, 1, 2, 1});
  auto ref = testing::make_vector(s, {1, 0, 1, 0});
  std::vector<double> grad(4, 0.0);
  EXPECT_DOUBLE_EQ(cosine_alignment_loss(cur, global, ref, 1.0, grad), 1.0);
  EXPECT_EQ(grad[0], 0.0);
  EXPECT_EQ(grad[1], 0.0);
}

TEST(Csa, ZeroLambdaEqualsCba) {
  Fixture f;
  auto out = csa_train(f.arch, f.data.samples, f.mixed, f.global, f.benign, f.malicious, 0.0);
  EXPECT_EQ(out.backdoored, cba_train(f.arch, f.mixed, f.global, f.malicious));
  EXPECT_EQ(out.reference, local_train(f.arch, f.global, f.data.samples, f.benign));
}

TEST(Csa, DefaultsMatchDeskSettings) {
  AttackConfig cfg;
  EXPECT_EQ(cfg.csa_lambda, 1.0);
  EXPECT_EQ(cfg.cla_top_k, 2);
  EXPECT_EQ(cfg.malicious_epochs, 5);
}

TEST(Csa, AlignmentMonotoneInLambda) {
  Fixture f;
  std::vector<double> cos;
  for (double lambda : {0.0, 1.0, 10.0}) {
    auto out = csa_train(f.arch, f.data.samples, f.mixed, f.global, f.benign, f.malicious, lambda);
    cos.push_back(mean(layer_cosines(out.backdoored, out.reference, f.global)));
  }
  EXPECT_GT(cos[1], cos[0]);
  EXPECT_GE(cos[2], cos[1]);
}

TEST(Cla, ExtremesOfK) {
  Fixture f;
  auto out = csa_train(f.arch, f.data.samples, f.mixed, f.global, f.benign, f.malicious, 1.0);
  EXPECT_EQ(cla_compose(out.reference, out.backdoored, f.global, 3), out.backdoored);
  EXPECT_EQ(cla_compose(out.reference, out.backdoored, f.global, 0), out.reference);
  EXPECT_THROW(cla_compose(out.reference, out.backdoored, f.global, 4), ConfigError);
}

TEST(Cla, TakesMostAlignedLayers) {
  auto s = testing::make_schema({{"a", 2}, {"b", 2}, {"c", 2}});
  auto global = testing::make_vector(s, {0, 0, 0, 0, 0, 0});
  auto benign = testing::make_vector(s, {1, 0, 1, 0, 1, 0});
  // Layer cosines to benign: a = 0, b = 1, c = 1/sqrt(2).
  auto bd = testing::make_vector(s, {0, 5, 3, 0, 2, 2});
  EXPECT_EQ(cla_compose(benign, bd, global, 2), testing::make_vector(s, {1, 0, 3, 0, 2, 2}));
  EXPECT_EQ(cla_compose(benign, bd, global, 1), testing::make_vector(s, {1, 0, 3, 0, 1, 0}));
}

}  // namespace
}  // namespace fedsur
