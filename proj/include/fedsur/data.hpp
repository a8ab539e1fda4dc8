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
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace fedsur {

struct Sample {
  std::vector<double> features;
  int label = 0;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  int num_classes = 0;
  std::size_t dim = 0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  /// Throws std::invalid_argument if feature lengths or labels are inconsistent.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset&) const = default;
};

struct TriggerSpec {
  std::vector<std::size_t> patch_coords;
  double patch_value = 1.0;
  int target_label = 1;
  int fragments = 1;

  /// Throws std::invalid_argument on out-of-range or duplicate coords, bad
  /// fragment count, or a target outside [0, num_classes).
  void validate(std::size_t dim, int num_classes) const;
  /// Coordinates of one fragment under round-robin assignment
  /// (coordinate k belongs to fragment k mod fragments).
  std::vector<std::size_t> fragment_coords(int fragment_index) const;
};

/// Row-major indices of the size x size patch in the lower-right corner of a
/// side x side grid.
std::vector<std::size_t> lower_right_patch(std::size_t side, std::size_t size = 3);

/// White 3x3 lower-right patch with target label 1 on a square input of `dim` features.
TriggerSpec default_trigger(std::size_t dim, int fragments = 1);

struct PartitionPlan {
  std::vector<std::vector<std::size_t>> client_indices;
  double alpha = 0.0;
};

/// Class-conditional Gaussian clouds clipped to [0, 1]; class means are drawn
/// uniformly from [0.15, 0.85]^dim.
Dataset generate_synthetic(int num_classes, std::size_t dim, std::size_t per_class, double spread,
                           std::uint64_t seed);

/// IDX image + label files (big-endian, magic 0x00000803 / 0x00000801).
/// Pixels are scaled to [0, 1]. Throws FormatError, TruncatedFileError or
/// CountMismatchError.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Per-class Dirichlet(alpha) split over clients. A draw that leaves any
/// client empty is redrawn with the next sub-seed, up to 100 attempts.
PartitionPlan dirichlet_partition(const Dataset& ds, int n_clients, double alpha, std::uint64_t seed);

/// Copy of `sample` with the patch (or one fragment of it) stamped and the
/// label set to the target.
Sample apply_trigger(const Sample& sample, const TriggerSpec& spec,
                     std::optional<int> fragment_index = std::nullopt);

/// Replaces exactly floor(pdr * n) samples, chosen by a seeded shuffle, with
/// their triggered versions.
std::vector<Sample> poison_partition(std::span<const Sample> part, double pdr, const TriggerSpec& spec,
                                     std::optional<int> fragment_index, std::uint64_t seed);

/// Deterministic per-class split: the first `train_per_class` samples of each
/// class go to train, the rest to test.
std::pair<Dataset, Dataset> split_per_class(const Dataset& ds, std::size_t train_per_class);

}  // namespace fedsur
