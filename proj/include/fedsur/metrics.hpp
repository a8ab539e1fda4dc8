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
#include <span>
#include <utility>

#include "fedsur/data.hpp"
#include "fedsur/model.hpp"
#include "fedsur/params.hpp"

namespace fedsur {

/// Detection confusion counts pooled over rounds.
struct DetectionTally {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  DetectionTally& operator+=(const DetectionTally& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const DetectionTally&) const = default;
};

/// Fraction of non-target test samples that the model sends to the target
/// label once the full trigger is applied. Throws UndefinedMetricError if
/// every test sample already carries the target label.
double asr(const MlpArchitecture& arch, const ParameterVector& params, std::span<const Sample> test,
           const TriggerSpec& trigger);

/// roles[i] is the ground truth of client id i; `flagged` holds client ids.
DetectionTally tally_round(const DetectionTally& tally, std::span<const int> flagged, std::span<const Role> roles);

struct Rates {
  double tpr = 0.0;
  double fpr = 0.0;
};

/// Throws UndefinedMetricError on a zero denominator.
Rates rates(const DetectionTally& tally);

/// Matthews correlation; 0 when any marginal is empty.
double mcc(const DetectionTally& tally);

}  // namespace fedsur
