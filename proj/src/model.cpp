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

#include "fedsur/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fedsur/errors.hpp"
#include "fedsur/rng.hpp"

namespace fedsur {

namespace {

SchemaPtr make_schema(const std::vector<std::size_t>& dims) {
  std::vector<std::pair<std::string, std::size_t>> layers;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    layers.emplace_back("fc" + std::to_string(k + 1), dims[k] * dims[k + 1] + dims[k + 1]);
  }
  return std::make_shared<const LayerSchema>(layers);
}

}  // namespace

Matrix features_matrix(std::span<const Sample> samples) {
  if (samples.empty()) return {};
  Matrix m(samples.size(), samples[0].features.size());
  for (std::size_t r = 0; r < samples.size(); ++r) {
    if (samples[r].features.size() != m.cols) throw std::invalid_argument("features_matrix: ragged samples");
    std::copy(samples[r].features.begin(), samples[r].features.end(), m.row(r).begin());
  }
  return m;
}

MlpArchitecture::MlpArchitecture(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 3) throw std::invalid_argument("MLP needs at least input, one hidden and output dims");
  if (std::any_of(dims_.begin(), dims_.end(), [](std::size_t d) { return d == 0; })) {
    throw std::invalid_argument("MLP dims must be positive");
  }
  schema_ = make_schema(dims_);
}

MlpArchitecture MlpArchitecture::desk_default(std::size_t input_dim, std::size_t num_classes) {
  return MlpArchitecture({input_dim, 32, 16, num_classes});
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
}

ParameterVector init_model(const MlpArchitecture& arch, std::uint64_t seed) {
  ParameterVector p(arch.schema());
  Rng rng(derive_seed(seed, {tag(Stream::init)}));
  const auto& dims = arch.dims();
  auto values = p.mutable_values();
  std::size_t off = 0;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[k]));
    std::uniform_real_distribution<double> u(-bound, bound);
    const std::size_t nw = dims[k] * dims[k + 1];
    for (std::size_t i = 0; i < nw; ++i) values[off + i] = u(rng);
    off += nw + dims[k + 1];  // biases stay zero
  }
  return p;
}

ForwardCache forward(const MlpArchitecture& arch, const ParameterVector& params, const Matrix& inputs) {
  if (inputs.cols != arch.input_dim()) {
    throw std::invalid_argument("forward: expected " + std::to_string(arch.input_dim()) + " features, got " +
                                std::to_string(inputs.cols));
  }
  const auto& dims = arch.dims();
  const auto values = params.values();
  ForwardCache cache;
  cache.activations.reserve(dims.size());
  cache.activations.push_back(inputs);

  std::size_t off = 0;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::size_t in = dims[k];
    const std::size_t out = dims[k + 1];
    const double* w = values.data() + off;
    const double* b = w + in * out;
    const Matrix& a = cache.activations.back();
    Matrix z(a.rows, out);
    const bool hidden = k + 2 < dims.size();
    for (std::size_t r = 0; r < a.rows; ++r) {
      const double* x = a.data.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        double acc = b[o];
        const double* wr = w + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += wr[i] * x[i];
        z(r, o) = hidden ? std::max(acc, 0.0) : acc;
      }
    }
    cache.activations.push_back(std::move(z));
    off += in * out + out;
  }
  return cache;
}

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) sum += (p(r, c) = std::exp(row[c] - m));
    for (std::size_t c = 0; c < logits.cols; ++c) p(r, c) /= sum;
  }
  return p;
}

double cross_entropy(const ForwardCache& cache, std::span<const int> labels) {
  const Matrix& z = cache.logits();
  if (labels.size() != z.rows) throw std::invalid_argument("cross_entropy: label count mismatch");
  double total = 0.0;
  for (std::size_t r = 0; r < z.rows; ++r) {
    const auto row = z.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - m);
    total += m + std::log(sum) - row[static_cast<std::size_t>(labels[r])];
  }
  return total / static_cast<double>(z.rows);
}

ParameterVector backward(const MlpArchitecture& arch, const ParameterVector& params, const ForwardCache& cache,
                         std::span<const int> labels) {
  const auto& dims = arch.dims();
  const std::size_t layers = dims.size() - 1;
  if (cache.activations.size() != dims.size()) throw std::invalid_argument("backward: cache does not match model");
  const Matrix& logits = cache.logits();
  const std::size_t batch = logits.rows;
  if (labels.size() != batch) throw std::invalid_argument("backward: label count mismatch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= arch.num_classes()) {
      throw std::out_of_range("backward: label " + std::to_string(y) + " out of range");
    }
  }

  ParameterVector grad(arch.schema());
  auto g = grad.mutable_values();
  const auto values = params.values();

  // delta = dL/dz for the current layer, starting at the softmax head.
  Matrix delta = softmax(logits);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    delta(r, static_cast<std::size_t>(labels[r])) -= 1.0;
    for (std::size_t c = 0; c < delta.cols; ++c) delta(r, c) *= inv_batch;
  }

  std::vector<std::size_t> offsets(layers);
  for (std::size_t k = 0, off = 0; k < layers; ++k) {
    offsets[k] = off;
    off += dims[k] * dims[k + 1] + dims[k + 1];
  }

  for (std::size_t k = layers; k-- > 0;) {
    const std::size_t in = dims[k];
    const std::size_t out = dims[k + 1];
    const Matrix& a = cache.activations[k];
    double* gw = g.data() + offsets[k];
    double* gb = gw + in * out;
    for (std::size_t r = 0; r < batch; ++r) {
      const double* x = a.data.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta(r, o);
        if (d == 0.0) continue;
        gb[o] += d;
        double* gwr = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gwr[i] += d * x[i];
      }
    }
    if (k == 0) break;
    const double* w = values.data() + offsets[k];
    Matrix prev(batch, in);
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta(r, o);
        if (d == 0.0) continue;
        const double* wr = w + o * in;
        for (std::size_t i = 0; i < in; ++i) prev(r, i) += d * wr[i];
      }
      // ReLU derivative: the cached activation is the post-ReLU output.
      for (std::size_t i = 0; i < in; ++i) {
        if (a(r, i) <= 0.0) prev(r, i) = 0.0;
      }
    }
    delta = std::move(prev);
  }
  return grad;
}

double dataset_loss(const MlpArchitecture& arch, const ParameterVector& params, std::span<const Sample> data) {
  if (data.empty()) throw std::invalid_argument("dataset_loss: empty data");
  const auto cache = forward(arch, params, features_matrix(data));
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data[i].label;
  return cross_entropy(cache, labels);
}

ParameterVector local_train(const MlpArchitecture& arch, const ParameterVector& start,
                            std::span<const Sample> data, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("local_train: empty data");
  ParameterVector params = start;
  Rng rng(derive_seed(cfg.seed, {tag(Stream::train)}));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  Matrix x;
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      x = Matrix(end - begin, arch.input_dim());
      labels.resize(end - begin);
      for (std::size_t r = begin; r < end; ++r) {
        const auto& s = data[order[r]];
        std::copy(s.features.begin(), s.features.end(), x.row(r - begin).begin());
        labels[r - begin] = s.label;
      }
      const auto cache = forward(arch, params, x);
      auto grad = backward(arch, params, cache, labels);
      if (hooks.extra_loss) hooks.extra_loss(params, grad.mutable_values());

      auto p = params.mutable_values();
      const auto gv = grad.values();
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= cfg.learning_rate * gv[i];
      if (hooks.post_step) hooks.post_step(p);
    }
  }
  return params;
}

std::vector<int> predict(const MlpArchitecture& arch, const ParameterVector& params, std::span<const Sample> data) {
  std::vector<int> out;
  if (data.empty()) return out;
  const auto cache = forward(arch, params, features_matrix(data));
  const Matrix& z = cache.logits();
  out.resize(z.rows);
  for (std::size_t r = 0; r < z.rows; ++r) {
    const auto row = z.row(r);
    // max_element returns the first maximum, i.e. the lowest index on ties.
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double evaluate(const MlpArchitecture& arch, const ParameterVector& params, std::span<const Sample> test) {
  if (test.empty()) throw UndefinedMetricError("evaluate: empty test set");
  const auto pred = predict(arch, params, test);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) correct += pred[i] == test[i].label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace fedsur
