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

#include "fedsur/simulation.hpp"

#include <exception>
#include <stdexcept>

#include "fedsur/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fedsur {

ParameterVector train_client(const RoundPlan& plan, const ClientTask& task) {
  const auto& arch = *plan.arch;
  const auto& global = *plan.global;
  const auto round = static_cast<std::uint64_t>(plan.round);
  const auto client = static_cast<std::uint64_t>(task.client_id);

  TrainConfig benign = plan.benign;
  benign.seed = derive_seed(plan.master_seed, {tag(Stream::train), round, client});
  if (task.role == Role::benign || plan.attack->kind == AttackKind::none) {
    return local_train(arch, global, task.clean, benign);
  }

  TrainConfig malicious = plan.malicious;
  malicious.seed = benign.seed;
  const auto& attack = *plan.attack;
  switch (attack.kind) {
    case AttackKind::cba:
      return cba_train(arch, task.mixed, global, malicious);
    case AttackKind::dba:
      return dba_train(arch, task.clean, global, malicious, attack.trigger, plan.pdr, task.adversary_index,
                       derive_seed(plan.master_seed, {tag(Stream::poison), client}));
    case AttackKind::neurotoxin:
      return neurotoxin_train(arch, task.mixed, global, malicious, plan.neurotoxin_mask);
    case AttackKind::csa:
    case AttackKind::cla: {
      TrainConfig reference = plan.benign;
      reference.seed = derive_seed(plan.master_seed, {tag(Stream::reference), round, client});
      auto trained = csa_train(arch, task.clean, task.mixed, global, reference, malicious, attack.csa_lambda,
                                attack.csa_grad_clip);
      if (attack.kind == AttackKind::csa) return std::move(trained.backdoored);
      return cla_compose(trained.reference, trained.backdoored, global, attack.cla_top_k);
    }
    case AttackKind::none:
      break;
  }
  return local_train(arch, global, task.clean, benign);
}

std::vector<ParameterVector> train_clients(const RoundPlan& plan, std::span<const ClientTask> tasks, int threads) {
  std::vector<ParameterVector> out(tasks.size());
  const auto n = static_cast<std::ptrdiff_t>(tasks.size());
  std::exception_ptr error;
#ifdef _OPENMP
  const int team = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(team)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = train_client(plan, tasks[static_cast<std::size_t>(i)]);
    } catch (...) {
#pragma omp critical(fedsur_train_error)
      if (!error) error = std::current_exception();
    }
  }
  (void)threads;
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<ParameterVector> train_clients_serial(const RoundPlan& plan, std::span<const ClientTask> tasks) {
  std::vector<ParameterVector> out;
  out.reserve(tasks.size());
  for (const auto& t : tasks) out.push_back(train_client(plan, t));
  return out;
}

}  // namespace fedsur
