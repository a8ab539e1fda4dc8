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

// OpenMP kernels against their serial references.

#include <optional>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "fedsur/attacks.hpp"
#include "fedsur/data.hpp"
#include "fedsur/model.hpp"
#include "fedsur/params.hpp"
#include "fedsur/simulation.hpp"

namespace {

using namespace fedsur;

struct TrainingRound {
  Dataset train = generate_synthetic(4, 64, 500, 0.1, 1);
  MlpArchitecture arch = MlpArchitecture::desk_default(64, 4);
  ParameterVector global = init_model(arch, 2);
  AttackConfig attack;
  std::vector<std::vector<Sample>> parts;
  std::vector<ClientTask> tasks;
  RoundPlan plan;

  explicit TrainingRound(int clients) {
    const auto split = dirichlet_partition(train, clients, 0.5, 3);
    for (const auto& idx : split.client_indices) parts.push_back(train.subset(idx).samples);
    for (int i = 0; i < clients; ++i) {
      ClientTask t;
      t.client_id = i;
      t.clean = parts[static_cast<std::size_t>(i)];
      tasks.push_back(t);
    }
    plan.arch = &arch;
    plan.global = &global;
    plan.attack = &attack;
    plan.benign = {2, 0.05, 32, 0};
    plan.malicious = {5, 0.05, 32, 0};
    plan.master_seed = 7;
  }
};

void BM_TrainClientsSerial(benchmark::State& state) {
  TrainingRound r(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(train_clients_serial(r.plan, r.tasks));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TrainClientsParallel(benchmark::State& state) {
  TrainingRound r(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(train_clients(r.plan, r.tasks));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<std::vector<double>> random_features(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& v : out) {
    for (auto& x : v) x = g(rng);
  }
  return out;
}

void BM_DistanceMatrixSerial(benchmark::State& state) {
  const auto feats = random_features(static_cast<std::size_t>(state.range(0)), 2692);
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_distance_matrix_serial(feats));
}

void BM_DistanceMatrixParallel(benchmark::State& state) {
  const auto feats = random_features(static_cast<std::size_t>(state.range(0)), 2692);
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_distance_matrix(feats));
}

}  // namespace

BENCHMARK(BM_TrainClientsSerial)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainClientsParallel)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistanceMatrixSerial)->Arg(20)->Arg(40)->Arg(100)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_DistanceMatrixParallel)->Arg(20)->Arg(40)->Arg(100)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
