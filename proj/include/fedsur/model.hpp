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
#include <functional>
#include <span>
#include <vector>

#include "fedsur/data.hpp"
#include "fedsur/params.hpp"

namespace fedsur {

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

Matrix features_matrix(std::span<const Sample> samples);

/// Fully connected ReLU network with a softmax cross-entropy head. Layer k
/// (1-based) is named "fck" and stores its out x in weight matrix followed by
/// its bias vector.
class MlpArchitecture {
 public:
  /// dims = {input, hidden..., output}; needs at least three entries.
  explicit MlpArchitecture(std::vector<std::size_t> dims);

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t input_dim() const noexcept { return dims_.front(); }
  std::size_t num_classes() const noexcept { return dims_.back(); }
  std::size_t layer_count() const noexcept { return dims_.size() - 1; }
  std::size_t param_count() const noexcept { return schema_->total_size(); }
  const SchemaPtr& schema() const noexcept { return schema_; }

  /// Desk-scale default {64, 32, 16, num_classes}.
  static MlpArchitecture desk_default(std::size_t input_dim, std::size_t num_classes);

 private:
  std::vector<std::size_t> dims_;
  SchemaPtr schema_;
};

struct TrainConfig {
  int epochs = 2;
  double learning_rate = 0.05;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ForwardCache {
  // activations[0] is the input; activations[k] is the post-ReLU output of
  // layer k for hidden layers and the logits for the last.
  std::vector<Matrix> activations;

  const Matrix& logits() const { return activations.back(); }
};

/// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
ParameterVector init_model(const MlpArchitecture& arch, std::uint64_t seed);

/// Throws std::invalid_argument on a feature-dimension mismatch.
ForwardCache forward(const MlpArchitecture& arch, const ParameterVector& params, const Matrix& inputs);

/// Row-wise numerically stable softmax.
Matrix softmax(const Matrix& logits);

/// Mean cross-entropy of a cached forward pass.
double cross_entropy(const ForwardCache& cache, std::span<const int> labels);

/// Gradient of the mean cross-entropy over the batch. Throws
/// std::out_of_range for a label outside [0, num_classes).
ParameterVector backward(const MlpArchitecture& arch, const ParameterVector& params, const ForwardCache& cache,
                         std::span<const int> labels);

/// Mean cross-entropy of `params` on `data`.
double dataset_loss(const MlpArchitecture& arch, const ParameterVector& params, std::span<const Sample> data);

/// Optional per-step callbacks for local training.
struct TrainHooks {
  /// Adds the gradient of an extra loss term (evaluated at the current
  /// parameters) into `grad`.
  std::function<void(const ParameterVector& current, std::span<double> grad)> extra_loss;
  /// Runs after every SGD step, e.g. to project the parameters.
  std::function<void(std::span<double> params)> post_step;
};

/// Mini-batch SGD: epochs x ceil(n / batch) steps, seeded shuffle every epoch.
ParameterVector local_train(const MlpArchitecture& arch, const ParameterVector& start,
                            std::span<const Sample> data, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Argmax over logits, ties to the lowest class index.
std::vector<int> predict(const MlpArchitecture& arch, const ParameterVector& params, std::span<const Sample> data);

/// Top-1 accuracy. Throws UndefinedMetricError on an empty set.
double evaluate(const MlpArchitecture& arch, const ParameterVector& params, std::span<const Sample> test);

}  // namespace fedsur
