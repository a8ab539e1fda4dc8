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

#include <gtest/gtest.h>

#include "fedsur/errors.hpp"
#include "fedsur/params.hpp"
#include "test_util.hpp"

namespace fedsur {
namespace {

using testing::make_schema;
using testing::make_vector;
using testing::random_values;

TEST(LayerSchema, BuildsContiguousSpans) {
  LayerSchema s({{"a", 2}, {"b", 3}, {"c", 1}});
  ASSERT_EQ(s.layer_count(), 3u);
  EXPECT_EQ(s.total_size(), 6u);
  EXPECT_EQ(s.find("a").offset, 0u);
  EXPECT_EQ(s.find("b").offset, 2u);
  EXPECT_EQ(s.find("c").offset, 5u);
  EXPECT_EQ(s.index_of("c"), 2u);
}

TEST(LayerSchema, RejectsBadTables) {
  using Table = std::vector<std::pair<std::string, std::size_t>>;
  EXPECT_THROW(LayerSchema(Table{{"a", 2}, {"a", 3}}), SchemaError);
  EXPECT_THROW(LayerSchema(Table{{"a", 0}}), SchemaError);
  EXPECT_THROW(LayerSchema(Table{{"", 1}}), SchemaError);
}

TEST(ParameterVector, RejectsLengthMismatchAndNonFinite) {
  auto s = make_schema({{"a", 2}});
  EXPECT_THROW(ParameterVector(s, {1.0}), SchemaError);
  EXPECT_THROW(ParameterVector(s, {1.0, std::nan("")}), std::invalid_argument);
  EXPECT_THROW(ParameterVector(s, {1.0, INFINITY}), std::invalid_argument);
}

TEST(LayerSlice, ReturnsNamedSubArray) {
  auto s = make_schema({{"a", 2}, {"b", 3}});
  auto v = make_vector(s, {1, 2, 3, 4, 5});
  auto b = layer_slice(v, "b");
  EXPECT_EQ(std::vector<double>(b.begin(), b.end()), (std::vector<double>{3, 4, 5}));
  auto a = layer_slice(v, "a");
  EXPECT_EQ(std::vector<double>(a.begin(), a.end()), (std::vector<double>{1, 2}));
  EXPECT_THROW(layer_slice(v, "c"), SchemaError);
}

TEST(GatherLayers, ConcatenatesInGivenOrder) {
  auto s = make_schema({{"a", 2}, {"b", 3}});
  auto v = make_vector(s, {1, 2, 3, 4, 5});
  std::vector<std::string> names = {"b", "a"};
  EXPECT_EQ(gather_layers(v, names), (std::vector<double>{3, 4, 5, 1, 2}));
}

TEST(CosineDistance, ReferenceCases) {
  EXPECT_DOUBLE_EQ(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{2, 0}), 0.0);
  EXPECT_DOUBLE_EQ(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{-3, 0}), 2.0);
}

TEST(CosineDistance, ZeroNormFallsBackToOne) {
  EXPECT_EQ(cosine_distance(std::vector<double>{0, 0}, std::vector<double>{1, 2}), 1.0);
  EXPECT_EQ(cosine_distance(std::vector<double>{1e-14, 0}, std::vector<double>{1, 2}), 1.0);
  EXPECT_EQ(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{0, 0}), 0.0);
}

TEST(CosineDistance, ScaleInvariantProperty) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<std::size_t>(testing::random_int(rng, 1, 40));
    auto a = random_values(rng, n);
    auto b = random_values(rng, n);
    const double c = scale(rng);
    auto ca = a;
    for (auto& x : ca) x *= c;
    const double d = cosine_distance(a, b);
    EXPECT_NEAR(d, cosine_distance(ca, b), 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
  }
}

TEST(PairwiseDistance, ReferenceCases) {
  std::vector<std::vector<double>> orth = {{1, 0}, {0, 1}};
  auto d = pairwise_distance_matrix(orth);
  EXPECT_EQ(d(0, 0), 0.0);
  EXPECT_EQ(d(0, 1), 1.0);
  EXPECT_EQ(d(1, 0), 1.0);

  std::vector<std::vector<double>> diag = {{1, 0}, {1, 1}};
  auto e = pairwise_distance_matrix(diag);
  EXPECT_NEAR(e(0, 1), 1.0 - 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(e(0, 1), 0.29289, 1e-5);

  std::vector<std::vector<double>> same = {{0.3, -2, 5}, {0.3, -2, 5}, {0.3, -2, 5}};
  auto z = pairwise_distance_matrix(same);
  for (double x : z.data()) EXPECT_NEAR(x, 0.0, 1e-15);
}

TEST(PairwiseDistance, SymmetricZeroDiagonalProperty) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = testing::random_int(rng, 2, 25);
    const auto dim = static_cast<std::size_t>(testing::random_int(rng, 1, 30));
    std::vector<std::vector<double>> vs;
    for (int i = 0; i < n; ++i) vs.push_back(random_values(rng, dim));
    if (trial % 7 == 0) vs[0].assign(dim, 0.0);
    auto d = pairwise_distance_matrix(vs);
    for (int i = 0; i < n; ++i) {
      EXPECT_EQ(d(i, i), 0.0);
      for (int j = 0; j < n; ++j) {
        EXPECT_EQ(d(i, j), d(j, i));
        EXPECT_GE(d(i, j), 0.0);
        EXPECT_LE(d(i, j), 2.0);
      }
    }
    EXPECT_EQ(d, pairwise_distance_matrix_serial(vs));
  }
}

TEST(ComputeUpdate, ReferenceCases) {
  auto s = make_schema({{"w", 2}});
  auto delta = compute_update(make_vector(s, {3, 3}), make_vector(s, {1, 2}));
  EXPECT_EQ(std::vector<double>(delta.values().begin(), delta.values().end()), (std::vector<double>{2, 1}));
  auto zero = compute_update(make_vector(s, {1, 2}), make_vector(s, {1, 2}));
  for (double x : zero.values()) EXPECT_EQ(x, 0.0);
  auto other = make_schema({{"v", 2}});
  EXPECT_THROW(compute_update(make_vector(s, {1, 2}), make_vector(other, {1, 2})), SchemaError);
}

TEST(ComputeUpdate, RoundTripProperty) {
  // Values on a 2^-20 grid in [-8, 8] make subtraction and addition exact.
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<long> grid(-(8L << 20), 8L << 20);
  auto s = make_schema({{"a", 7}, {"b", 5}});
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> m(12), g(12);
    for (auto& x : m) x = std::ldexp(static_cast<double>(grid(rng)), -20);
    for (auto& x : g) x = std::ldexp(static_cast<double>(grid(rng)), -20);
    auto model = make_vector(s, m);
    auto global = make_vector(s, g);
    auto delta = compute_update(model, global);
    EXPECT_EQ(apply_update(global, delta), model);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(model[i] - delta[i], global[i]);
  }
}

TEST(MakeClientUpdate, CarriesMetadata) {
  auto s = make_schema({{"w", 2}});
  auto u = make_client_update(7, make_vector(s, {3, 3}), make_vector(s, {1, 2}), 12, Role::malicious);
  EXPECT_EQ(u.client_id, 7);
  EXPECT_EQ(u.sample_count, 12);
  EXPECT_EQ(u.true_role, Role::malicious);
  EXPECT_TRUE(u.delta.same_schema(u.model));
  EXPECT_EQ(u.delta[0], 2.0);
}

TEST(DistanceMatrix, ScaledMultipliesEveryEntry) {
  DistanceMatrix d(2, {0, 0.5, 0.5, 0});
  auto s = d.scaled(4.0);
  EXPECT_EQ(s(0, 1), 2.0);
  EXPECT_EQ(s(1, 1), 0.0);
}

}  // namespace
}  // namespace fedsur
