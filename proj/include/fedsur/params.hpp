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

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fedsur {

/// Norms below this are treated as zero by every cosine computation.
inline constexpr double kZeroNorm = 1e-12;

struct LayerSpan {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const LayerSpan&) const = default;
};

/// Ordered table of named, contiguous, non-overlapping layers covering a flat
/// parameter array.
class LayerSchema {
 public:
  LayerSchema() = default;
  /// Builds contiguous spans from (name, length) pairs in order. Throws
  /// SchemaError on empty or duplicate names and zero lengths.
  explicit LayerSchema(const std::vector<std::pair<std::string, std::size_t>>& layers);

  const std::vector<LayerSpan>& layers() const noexcept { return layers_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t total_size() const noexcept { return total_; }

  bool contains(std::string_view name) const noexcept;
  /// Position of `name` in schema order; throws SchemaError if absent.
  std::size_t index_of(std::string_view name) const;
  const LayerSpan& find(std::string_view name) const { return layers_[index_of(name)]; }
  std::vector<std::string> names() const;

  bool operator==(const LayerSchema& other) const { return layers_ == other.layers_; }

 private:
  std::vector<LayerSpan> layers_;
  std::size_t total_ = 0;
};

using SchemaPtr = std::shared_ptr<const LayerSchema>;

/// Flat 64-bit parameter array viewed through a shared LayerSchema.
class ParameterVector {
 public:
  ParameterVector() = default;
  /// Zero-initialised vector of the schema's size.
  explicit ParameterVector(SchemaPtr schema);
  /// Throws SchemaError on length mismatch and std::invalid_argument on a
  /// non-finite entry.
  ParameterVector(SchemaPtr schema, std::vector<double> values);

  const LayerSchema& schema() const { return *schema_; }
  const SchemaPtr& schema_ptr() const noexcept { return schema_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> mutable_values() noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<const double> layer(std::string_view name) const;
  std::span<double> mutable_layer(std::string_view name);

  bool same_schema(const ParameterVector& other) const;
  bool all_finite() const noexcept;

  bool operator==(const ParameterVector& other) const {
    return same_schema(other) && values_ == other.values_;
  }

 private:
  SchemaPtr schema_;
  std::vector<double> values_;
};

enum class Role { benign, malicious };

struct ClientUpdate {
  int client_id = 0;
  ParameterVector delta;  // model - global
  ParameterVector model;
  int sample_count = 1;
  Role true_role = Role::benign;  // metrics only; the defense never reads it
};

/// Contiguous sub-array of one named layer. Throws SchemaError on unknown name.
std::span<const double> layer_slice(const ParameterVector& v, std::string_view name);

/// Concatenation of the named layers, in the order given.
std::vector<double> gather_layers(const ParameterVector& v, std::span<const std::string> names);

/// Left-to-right sequential dot product.
double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Cosine similarity; returns 0 when either norm is below kZeroNorm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// 1 - cos(a, b) clamped to [0, 2]; 1.0 when either norm is below kZeroNorm.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Dense symmetric n x n matrix stored row-major.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}
  DistanceMatrix(std::size_t n, std::vector<double> data);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }
  std::span<const double> data() const noexcept { return data_; }

  DistanceMatrix scaled(double c) const;
  bool operator==(const DistanceMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Pairwise cosine distances, rows computed in parallel (OpenMP). Each entry is
/// evaluated with the same sequential reduction as the serial version, so the
/// result is bit-identical for any thread count.
DistanceMatrix pairwise_distance_matrix(std::span<const std::vector<double>> vectors);
/// Single-threaded reference for pairwise_distance_matrix.
DistanceMatrix pairwise_distance_matrix_serial(std::span<const std::vector<double>> vectors);

/// Pairwise Euclidean distances.
DistanceMatrix pairwise_euclidean_matrix(std::span<const std::vector<double>> vectors);

/// model - global. Throws SchemaError on schema mismatch.
ParameterVector compute_update(const ParameterVector& model, const ParameterVector& global);
/// global + delta.
ParameterVector apply_update(const ParameterVector& global, const ParameterVector& delta);

ClientUpdate make_client_update(int client_id, ParameterVector model, const ParameterVector& global,
                                int sample_count, Role role = Role::benign);

}  // namespace fedsur
