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

#include "fedsur/params.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "fedsur/errors.hpp"

namespace fedsur {

LayerSchema::LayerSchema(const std::vector<std::pair<std::string, std::size_t>>& layers) {
  std::set<std::string> seen;
  for (const auto& [name, length] : layers) {
    if (name.empty()) throw SchemaError("layer name must be non-empty");
    if (length == 0) throw SchemaError("layer '" + name + "' has zero length");
    if (!seen.insert(name).second) throw SchemaError("duplicate layer name '" + name + "'");
    layers_.push_back({name, total_, length});
    total_ += length;
  }
}

bool LayerSchema::contains(std::string_view name) const noexcept {
  return std::any_of(layers_.begin(), layers_.end(),
                     [&](const LayerSpan& l) { return l.name == name; });
}

std::size_t LayerSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].name == name) return i;
  }
  throw SchemaError("unknown layer '" + std::string(name) + "'");
}

std::vector<std::string> LayerSchema::names() const {
  std::vector<std::string> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l.name);
  return out;
}

ParameterVector::ParameterVector(SchemaPtr schema)
    : schema_(std::move(schema)), values_(schema_ ? schema_->total_size() : 0, 0.0) {
  if (!schema_) throw SchemaError("null schema");
}

ParameterVector::ParameterVector(SchemaPtr schema, std::vector<double> values)
    : schema_(std::move(schema)), values_(std::move(values)) {
  if (!schema_) throw SchemaError("null schema");
  if (values_.size() != schema_->total_size()) {
    throw SchemaError("parameter count " + std::to_string(values_.size()) +
                      " does not match schema size " + std::to_string(schema_->total_size()));
  }
  if (!all_finite()) throw std::invalid_argument("parameter vector contains non-finite values");
}

std::span<const double> ParameterVector::layer(std::string_view name) const {
  const auto& l = schema_->find(name);
  return std::span<const double>(values_).subspan(l.offset, l.length);
}

std::span<double> ParameterVector::mutable_layer(std::string_view name) {
  const auto& l = schema_->find(name);
  return std::span<double>(values_).subspan(l.offset, l.length);
}

bool ParameterVector::same_schema(const ParameterVector& other) const {
  if (!schema_ || !other.schema_) return false;
  return schema_ == other.schema_ || *schema_ == *other.schema_;
}

bool ParameterVector::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

std::span<const double> layer_slice(const ParameterVector& v, std::string_view name) {
  return v.layer(name);
}

std::vector<double> gather_layers(const ParameterVector& v, std::span<const std::string> names) {
  std::vector<double> out;
  for (const auto& name : names) {
    auto s = v.layer(name);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

namespace {

// cos from precomputed squared norms; sqrt(na * nb) keeps cos(a, a) exactly 1.
double cosine_from(double ab, double aa, double bb) {
  if (std::sqrt(aa) < kZeroNorm || std::sqrt(bb) < kZeroNorm) return 0.0;
  const double c = ab / std::sqrt(aa * bb);
  return std::clamp(c, -1.0, 1.0);
}

double distance_from(double ab, double aa, double bb) {
  if (std::sqrt(aa) < kZeroNorm || std::sqrt(bb) < kZeroNorm) return 1.0;
  return std::clamp(1.0 - cosine_from(ab, aa, bb), 0.0, 2.0);
}

void check_vectors(std::span<const std::vector<double>> vectors) {
  if (vectors.size() < 2) throw std::invalid_argument("distance matrix needs at least 2 vectors");
  for (const auto& v : vectors) {
    if (v.size() != vectors[0].size()) throw std::invalid_argument("distance matrix: length mismatch");
  }
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  return cosine_from(dot(a, b), dot(a, a), dot(b, b));
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  return distance_from(dot(a, b), dot(a, a), dot(b, b));
}

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> data) : n_(n), data_(std::move(data)) {
  if (data_.size() != n * n) throw std::invalid_argument("distance matrix: wrong element count");
}

DistanceMatrix DistanceMatrix::scaled(double c) const {
  DistanceMatrix out = *this;
  for (auto& x : out.data_) x *= c;
  return out;
}

DistanceMatrix pairwise_distance_matrix(std::span<const std::vector<double>> vectors) {
  check_vectors(vectors);
  const auto n = static_cast<std::ptrdiff_t>(vectors.size());
  std::vector<double> sq(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) sq[i] = dot(vectors[i], vectors[i]);

  DistanceMatrix d(vectors.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t j = i + 1; j < n; ++j) {
      const double v = distance_from(dot(vectors[i], vectors[j]), sq[i], sq[j]);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

DistanceMatrix pairwise_distance_matrix_serial(std::span<const std::vector<double>> vectors) {
  check_vectors(vectors);
  const std::size_t n = vectors.size();
  DistanceMatrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = cosine_distance(vectors[i], vectors[j]);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

DistanceMatrix pairwise_euclidean_matrix(std::span<const std::vector<double>> vectors) {
  check_vectors(vectors);
  const std::size_t n = vectors.size();
  DistanceMatrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < vectors[i].size(); ++k) {
        const double diff = vectors[i][k] - vectors[j][k];
        acc += diff * diff;
      }
      d(i, j) = d(j, i) = std::sqrt(acc);
    }
  }
  return d;
}

ParameterVector compute_update(const ParameterVector& model, const ParameterVector& global) {
  if (!model.same_schema(global)) throw SchemaError("compute_update: schema mismatch");
  std::vector<double> delta(model.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = model[i] - global[i];
  return ParameterVector(model.schema_ptr(), std::move(delta));
}

ParameterVector apply_update(const ParameterVector& global, const ParameterVector& delta) {
  if (!delta.same_schema(global)) throw SchemaError("apply_update: schema mismatch");
  std::vector<double> out(global.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = global[i] + delta[i];
  return ParameterVector(global.schema_ptr(), std::move(out));
}

ClientUpdate make_client_update(int client_id, ParameterVector model, const ParameterVector& global,
                                int sample_count, Role role) {
  if (sample_count < 1) throw std::invalid_argument("sample_count must be >= 1");
  ClientUpdate u;
  u.client_id = client_id;
  u.delta = compute_update(model, global);
  u.model = std::move(model);
  u.sample_count = sample_count;
  u.true_role = role;
  return u;
}

}  // namespace fedsur
