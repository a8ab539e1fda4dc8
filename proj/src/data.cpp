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

#include "fedsur/data.hpp"


#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "fedsur/errors.hpp"
#include "fedsur/rng.hpp"

namespace fedsur {

void Dataset::validate() const {
  if (num_classes <= 0) throw std::invalid_argument("dataset: num_classes must be positive");
  for (const auto& s : samples) {
    if (s.features.size() != dim) throw std::invalid_argument("dataset: inconsistent feature length");
    if (s.label < 0 || s.label >= num_classes) throw std::invalid_argument("dataset: label out of range");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.dim = dim;
  out.samples.reserve(indices.size());
  for (auto i : indices) out.samples.push_back(samples.at(i));
  return out;
}

void TriggerSpec::validate(std::size_t dim, int num_classes) const {
  if (patch_coords.empty()) throw std::invalid_argument("trigger: empty patch");
  std::set<std::size_t> unique(patch_coords.begin(), patch_coords.end());
  if (unique.size() != patch_coords.size()) throw std::invalid_argument("trigger: duplicate coordinates");
  if (*unique.rbegin() >= dim) throw std::invalid_argument("trigger: coordinate out of range");
  if (target_label < 0 || target_label >= num_classes) throw std::invalid_argument("trigger: bad target label");
  if (fragments < 1 || static_cast<std::size_t>(fragments) > patch_coords.size()) {
    throw std::invalid_argument("trigger: fragments must be in [1, |patch|]");
  }
}

std::vector<std::size_t> TriggerSpec::fragment_coords(int fragment_index) const {
  if (fragment_index < 0 || fragment_index >= fragments) {
    throw std::out_of_range("trigger: fragment index " + std::to_string(fragment_index) + " out of range");
  }
  std::vector<std::size_t> out;
  for (std::size_t k = static_cast<std::size_t>(fragment_index); k < patch_coords.size();
       k += static_cast<std::size_t>(fragments)) {
    out.push_back(patch_coords[k]);
  }
  return out;
}

std::vector<std::size_t> lower_right_patch(std::size_t side, std::size_t size) {
  if (size > side) throw std::invalid_argument("patch larger than grid");
  std::vector<std::size_t> out;
  for (std::size_t r = side - size; r < side; ++r) {
    for (std::size_t c = side - size; c < side; ++c) out.push_back(r * side + c);
  }
  return out;
}

TriggerSpec default_trigger(std::size_t dim, int fragments) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dim))));
  if (side * side != dim) throw std::invalid_argument("default trigger needs a square input");
  TriggerSpec t;
  t.patch_coords = lower_right_patch(side, 3);
  t.patch_value = 1.0;
  t.target_label = 1;
  t.fragments = fragments;
  return t;
}

Dataset generate_synthetic(int num_classes, std::size_t dim, std::size_t per_class, double spread,
                           std::uint64_t seed) {
  if (num_classes <= 0 || dim == 0 || per_class == 0) {
    throw std::invalid_argument("generate_synthetic: counts must be positive");
  }
  if (!(spread >= 0.0)) throw std::invalid_argument("generate_synthetic: spread must be non-negative");

  Rng rng(derive_seed(seed, {tag(Stream::data)}));
  std::uniform_real_distribution<double> mean_dist(0.15, 0.85);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<std::vector<double>> means(static_cast<std::size_t>(num_classes), std::vector<double>(dim));
  for (auto& m : means) {
    for (auto& x : m) x = mean_dist(rng);
  }

  Dataset ds;
  ds.num_classes = num_classes;
  ds.dim = dim;
  ds.samples.reserve(per_class * static_cast<std::size_t>(num_classes));
  // Interleave classes so prefixes stay balanced.
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int c = 0; c < num_classes; ++c) {
      Sample s;
      s.label = c;
      s.features.resize(dim);
      for (std::size_t k = 0; k < dim; ++k) {
        s.features[k] = std::clamp(means[static_cast<std::size_t>(c)][k] + spread * noise(rng), 0.0, 1.0);
      }
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t pos, const std::string& what) {
  if (pos + 4 > buf.size()) throw TruncatedFileError(what + ": truncated header");
  return (std::uint32_t{buf[pos]} << 24) | (std::uint32_t{buf[pos + 1]} << 16) |
         (std::uint32_t{buf[pos + 2]} << 8) | std::uint32_t{buf[pos + 3]};
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto images = read_all(images_path);
  const auto labels = read_all(labels_path);

  if (read_be32(images, 0, "images") != kImageMagic) throw FormatError("images: bad IDX magic");
  if (read_be32(labels, 0, "labels") != kLabelMagic) throw FormatError("labels: bad IDX magic");

  const std::size_t n_images = read_be32(images, 4, "images");
  const std::size_t rows = read_be32(images, 8, "images");
  const std::size_t cols = read_be32(images, 12, "images");
  const std::size_t n_labels = read_be32(labels, 4, "labels");

  if (n_images != n_labels) {
    throw CountMismatchError("image count " + std::to_string(n_images) + " != label count " +
                             std::to_string(n_labels));
  }
  const std::size_t dim = rows * cols;
  if (images.size() < 16 + n_images * dim) throw TruncatedFileError("images: truncated pixel data");
  if (labels.size() < 8 + n_labels) throw TruncatedFileError("labels: truncated label data");

  Dataset ds;
  ds.dim = dim;
  ds.samples.resize(n_images);
  int max_label = 0;
  for (std::size_t i = 0; i < n_images; ++i) {
    auto& s = ds.samples[i];
    s.features.resize(dim);
    const auto* px = images.data() + 16 + i * dim;
    for (std::size_t k = 0; k < dim; ++k) s.features[k] = static_cast<double>(px[k]) / 255.0;
    s.label = labels[8 + i];
    max_label = std::max(max_label, s.label);
  }
  ds.num_classes = std::max(10, max_label + 1);
  return ds;
}

PartitionPlan dirichlet_partition(const Dataset& ds, int n_clients, double alpha, std::uint64_t seed) {
  if (n_clients < 2) throw std::invalid_argument("dirichlet_partition: need at least 2 clients");
  if (!(alpha > 0.0)) throw std::invalid_argument("dirichlet_partition: alpha must be positive");
  if (ds.empty()) throw std::invalid_argument("dirichlet_partition: empty dataset");
  if (ds.size() < static_cast<std::size_t>(n_clients)) {
    throw InfeasibleError("dirichlet_partition: fewer samples than clients");
  }

  const auto clients = static_cast<std::size_t>(n_clients);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i) by_class.at(static_cast<std::size_t>(ds.samples[i].label)).push_back(i);

  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(derive_seed(seed, {tag(Stream::partition), static_cast<std::uint64_t>(attempt)}));
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<std::vector<std::size_t>> plan(clients);

    for (auto members : by_class) {
      if (members.empty()) continue;
      std::shuffle(members.begin(), members.end(), rng);
      std::vector<double> p(clients);
      double total = 0.0;
      for (auto& x : p) total += (x = gamma(rng));
      if (!(total > 0.0)) {
        std::fill(p.begin(), p.end(), 1.0);
        total = static_cast<double>(clients);
      }
      double cumulative = 0.0;
      std::size_t start = 0;
      for (std::size_t c = 0; c < clients; ++c) {
        cumulative += p[c] / total;
        std::size_t end = c + 1 == clients
                              ? members.size()
                              : std::min(members.size(), static_cast<std::size_t>(cumulative * members.size()));
        end = std::max(end, start);
        plan[c].insert(plan[c].end(), members.begin() + static_cast<std::ptrdiff_t>(start),
                       members.begin() + static_cast<std::ptrdiff_t>(end));
        start = end;
      }
    }
    if (std::any_of(plan.begin(), plan.end(), [](const auto& v) { return v.empty(); })) continue;
    for (auto& v : plan) std::sort(v.begin(), v.end());
    return {std::move(plan), alpha};
  }
  throw InfeasibleError("dirichlet_partition: every draw left a client empty");
}

Sample apply_trigger(const Sample& sample, const TriggerSpec& spec, std::optional<int> fragment_index) {
  Sample out = sample;
  const auto coords = fragment_index ? spec.fragment_coords(*fragment_index) : spec.patch_coords;
  for (auto c : coords) out.features.at(c) = spec.patch_value;
  out.label = spec.target_label;
  return out;
}

std::vector<Sample> poison_partition(std::span<const Sample> part, double pdr, const TriggerSpec& spec,
                                     std::optional<int> fragment_index, std::uint64_t seed) {
  if (!(pdr >= 0.0 && pdr <= 1.0)) throw std::invalid_argument("poison_partition: pdr must be in [0, 1]");
  std::vector<Sample> out(part.begin(), part.end());
  const auto count = static_cast<std::size_t>(floor_fraction(pdr, static_cast<long>(part.size())));
  if (count == 0) return out;

  std::vector<std::size_t> order(part.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {tag(Stream::poison)}));
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 0; k < count; ++k) out[order[k]] = apply_trigger(part[order[k]], spec, fragment_index);
  return out;
}

std::pair<Dataset, Dataset> split_per_class(const Dataset& ds, std::size_t train_per_class) {
  Dataset train, test;
  train.num_classes = test.num_classes = ds.num_classes;
  train.dim = test.dim = ds.dim;
  std::vector<std::size_t> seen(static_cast<std::size_t>(ds.num_classes), 0);
  for (const auto& s : ds.samples) {
    auto& count = seen.at(static_cast<std::size_t>(s.label));
    (count++ < train_per_class ? train : test).samples.push_back(s);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace fedsur
