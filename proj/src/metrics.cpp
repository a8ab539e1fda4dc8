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

#include "fedsur/metrics.hpp"

#include <cmath>
#include <set>
#include <vector>

#include "fedsur/errors.hpp"

namespace fedsur {

double asr(const MlpArchitecture& arch, const ParameterVector& params, std::span<const Sample> test,
           const TriggerSpec& trigger) {
  std::vector<Sample> triggered;
  for (const auto& s : test) {
    if (s.label != trigger.target_label) triggered.push_back(apply_trigger(s, trigger));
  }
  if (triggered.empty()) throw UndefinedMetricError("asr: no test sample outside the target class");
  const auto pred = predict(arch, params, triggered);
  std::size_t hits = 0;
  for (int p : pred) hits += p == trigger.target_label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(triggered.size());
}

DetectionTally tally_round(const DetectionTally& tally, std::span<const int> flagged, std::span<const Role> roles) {
  const std::set<int> f(flagged.begin(), flagged.end());
  DetectionTally out = tally;
  for (std::size_t i = 0; i < roles.size(); ++i) {
    const bool hit = f.contains(static_cast<int>(i));
    if (roles[i] == Role::malicious) {
      ++(hit ? out.tp : out.fn);
    } else {
      ++(hit ? out.fp : out.tn);
    }
  }
  return out;
}

Rates rates(const DetectionTally& t) {
  if (t.tp + t.fn == 0) throw UndefinedMetricError("rates: no malicious observations");
  if (t.fp + t.tn == 0) throw UndefinedMetricError("rates: no benign observations");
  return {static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fn),
          static_cast<double>(t.fp) / static_cast<double>(t.fp + t.tn)};
}

double mcc(const DetectionTally& t) {
  const double tp = static_cast<double>(t.tp);
  const double fp = static_cast<double>(t.fp);
  const double tn = static_cast<double>(t.tn);
  const double fn = static_cast<double>(t.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

}  // namespace fedsur
