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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fedsur/data.hpp"
#include "fedsur/errors.hpp"
#include "fedsur/metrics.hpp"
#include "fedsur/model.hpp"

namespace fedsur {
namespace {

std::vector<Role> roles_of(int malicious, int benign) {
  std::vector<Role> r(static_cast<std::size_t>(malicious), Role::malicious);
  r.insert(r.end(), static_cast<std::size_t>(benign), Role::benign);
  return r;
}

TEST(Asr, ConstantTargetPredictorScoresOne) {
  MlpArchitecture arch({64, 4, 4});
  ParameterVector p(arch.schema());
  p.mutable_layer("fc2")[16 + 1] = 1.0;  // bias of class 1
  auto ds = generate_synthetic(4, 64, 10, 0.1, 1);
  EXPECT_EQ(asr(arch, p, ds.samples, default_trigger(64)), 1.0);
}

TEST(Asr, ExcludesTargetClassAndNeedsEligibleSamples) {
  MlpArchitecture arch({64, 4, 4});
  ParameterVector p(arch.schema());  // predicts class 0 everywhere
  auto ds = generate_synthetic(4, 64, 10, 0.1, 1);
  EXPECT_EQ(asr(arch, p, ds.samples, default_trigger(64)), 0.0);
  std::vector<Sample> only_target;
  for (const auto& s : ds.samples) {
    if (s.label == 1) only_target.push_back(s);
  }
  EXPECT_THROW(asr(arch, p, only_target, default_trigger(64)), UndefinedMetricError);
}

TEST(Asr, CleanTrainedModelStaysNearBaseline) {
  auto ds = generate_synthetic(4, 64, 300, 0.1, 2);
  auto [train, test] = split_per_class(ds, 200);
  auto arch = MlpArchitecture::desk_default(64, 4);
  TrainConfig cfg;
  cfg.epochs = 5;
  auto p = local_train(arch, init_model(arch, 3), train.samples, cfg);
  EXPECT_LE(asr(arch, p, test.samples, default_trigger(64)), 1.0 / 3.0);
}

TEST(TallyRound, ReferenceCases) {
  auto roles = roles_of(4, 16);
  auto exact = tally_round({}, std::vector<int>{0, 1, 2, 3}, roles);
  EXPECT_EQ(exact, (DetectionTally{4, 0, 16, 0}));
  auto none = tally_round({}, std::vector<int>{}, roles);
  EXPECT_EQ(none.fn, 4u);
  std::vector<int> everyone(20);
  for (int i = 0; i < 20; ++i) everyone[static_cast<std::size_t>(i)] = i;
  EXPECT_EQ(tally_round({}, everyone, roles).fp, 16u);
}

TEST(TallyRound, ConservesTotalsProperty) {
  std::mt19937_64 rng(91);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = std::uniform_int_distribution<int>(0, 8)(rng);
    const int b = std::uniform_int_distribution<int>(0, 20)(rng);
    auto roles = roles_of(m, b);
    std::vector<int> flagged;
    for (int i = 0; i < m + b; ++i) {
      if (rng() % 3 == 0) flagged.push_back(i);
    }
    DetectionTally before{rng() % 5, rng() % 5, rng() % 5, rng() % 5};
    auto after = tally_round(before, flagged, roles);
    EXPECT_EQ((after.tp - before.tp) + (after.fn - before.fn), static_cast<std::uint64_t>(m));
    EXPECT_EQ((after.fp - before.fp) + (after.tn - before.tn), static_cast<std::uint64_t>(b));
    EXPECT_EQ((after.tp - before.tp) + (after.fp - before.fp), flagged.size());
  }
}

TEST(Rates, ReferenceCases) {
  auto r = rates({99, 2, 98, 1});
  EXPECT_DOUBLE_EQ(r.tpr, 0.99);
  EXPECT_DOUBLE_EQ(r.fpr, 0.02);
  auto perfect = rates({4, 0, 16, 0});
  EXPECT_EQ(perfect.tpr, 1.0);
  EXPECT_EQ(perfect.fpr, 0.0);
  EXPECT_THROW(rates({0, 1, 1, 0}), UndefinedMetricError);
  EXPECT_THROW(rates({1, 0, 0, 1}), UndefinedMetricError);
}

TEST(Mcc, ReferenceCases) {
  EXPECT_DOUBLE_EQ(mcc({4, 0, 16, 0}), 1.0);
  EXPECT_DOUBLE_EQ(mcc({0, 4, 0, 16}), -1.0);
  EXPECT_EQ(mcc({4, 16, 0, 0}), 0.0);
  EXPECT_EQ(mcc({0, 0, 16, 4}), 0.0);
  // (tp tn - fp fn) / sqrt((tp+fp)(tp+fn)(tn+fp)(tn+fn)) for (3, 1, 15, 1).
  EXPECT_NEAR(mcc({3, 1, 15, 1}), (45.0 - 1.0) / std::sqrt(4.0 * 4.0 * 16.0 * 16.0), 1e-12);
}

TEST(RatesAndMcc, BoundedOnFuzzedTallies) {
  std::mt19937_64 rng(92);
  for (int trial = 0; trial < 1000; ++trial) {
    DetectionTally t{rng() % 50, rng() % 50, rng() % 50, rng() % 50};
    const double m = mcc(t);
    EXPECT_GE(m, -1.0);
    EXPECT_LE(m, 1.0);
    if (t.tp + t.fn > 0 && t.fp + t.tn > 0) {
      auto r = rates(t);
      EXPECT_GE(r.tpr, 0.0);
      EXPECT_LE(r.tpr, 1.0);
      EXPECT_GE(r.fpr, 0.0);
      EXPECT_LE(r.fpr, 1.0);
    }
  }
}

}  // namespace
}  // namespace fedsur
