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
#include <vector>

#include "fedsur/attacks.hpp"
#include "fedsur/data.hpp"
#include "fedsur/model.hpp"
#include "fedsur/params.hpp"

namespace fedsur {

/// Everything a client needs to train in one round.
struct RoundPlan {
  const MlpArchitecture* arch = nullptr;
  const ParameterVector* global = nullptr;
  const AttackConfig* attack = nullptr;
  TrainConfig benign;        // seed ignored; per-client seeds are derived
  TrainConfig malicious;     // likewise
  double pdr = 0.0;
  Mask neurotoxin_mask;      // empty unless the attack is neurotoxin
  std::uint64_t master_seed = 0;
  int round = 0;
};

struct ClientTask {
  int client_id = 0;
  Role role = Role::benign;
  int adversary_index = -1;           // position among malicious clients
  std::span<const Sample> clean;
  std::span<const Sample> mixed;      // pre-poisoned data (non-DBA attacks)
};

/// Local training of one client under the plan. Pure function of its inputs.
ParameterVector train_client(const RoundPlan& plan, const ClientTask& task);

/// Trains every client with an OpenMP parallel loop. Clients are independent
/// and each is trained sequentially, so the result does not depend on the
/// thread count. threads <= 0 keeps the OpenMP default.
std::vector<ParameterVector> train_clients(const RoundPlan& plan, std::span<const ClientTask> tasks, int threads = 0);

/// Single-threaded reference for train_clients.
std::vector<ParameterVector> train_clients_serial(const RoundPlan& plan, std::span<const ClientTask> tasks);

}  // namespace fedsur
