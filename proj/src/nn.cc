// Copyright 2026 The fedwatch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedwatch/nn.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fedwatch/errors.h"
#include "fedwatch/rng.h"

namespace fedwatch {

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
    case Activation::kSoftmax:
      return "softmax";
  }
  return "unknown";
}

std::vector<LayerSlot> make_layout(std::span<const LayerSpec> layers) {
  std::vector<LayerSlot> layout;
  layout.reserve(layers.size());
  std::size_t offset = 0;
  for (const auto& layer : layers) {
    LayerSlot slot;
    slot.offset = offset;
    slot.weight_offset = offset;
    slot.weight_length = layer.input_dim * layer.output_dim;
    slot.bias_offset = offset + slot.weight_length;
    slot.bias_length = layer.output_dim;
    slot.length = slot.weight_length + slot.bias_length;
    offset += slot.length;
    layout.push_back(slot);
  }
  return layout;
}

namespace {

void validate_layers(std::span<const LayerSpec> layers) {
  if (layers.empty()) throw InputError("network needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.input_dim == 0 || layer.output_dim == 0) {
      throw InputError("layer " + std::to_string(i) + " has a zero dimension");
    }
    if (i > 0 && layers[i - 1].output_dim != layer.input_dim) {
      throw InputError("layer " + std::to_string(i) +
                       " input_dim does not match previous output_dim");
    }
    if (layer.activation == Activation::kSoftmax && i + 1 != layers.size()) {
      throw InputError("softmax is only allowed on the final layer");
    }
  }
}

std::size_t total_params(std::span<const LayerSpec> layers) {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.param_count();
  return n;
}

}  // namespace

Network::Network(std::vector<LayerSpec> layers, WeightVector params)
    : layers_(std::move(layers)), params_(std::move(params)) {
  validate_layers(layers_);
  if (params_.size() != total_params(layers_)) {
    throw ShapeError("parameter vector has " + std::to_string(params_.size()) +
                     " entries, architecture needs " +
                     std::to_string(total_params(layers_)));
  }
  layout_ = make_layout(layers_);
}

Network Network::initialize(std::vector<LayerSpec> layers, std::uint64_t seed) {
  validate_layers(layers);
  WeightVector params(total_params(layers), 0.0);
  Rng rng(seed);
  const auto layout = make_layout(layers);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const double fan = static_cast<double>(layers[l].input_dim + layers[l].output_dim);
    const double limit = std::sqrt(6.0 / fan);
    for (std::size_t i = 0; i < layout[l].weight_length; ++i) {
      params[layout[l].weight_offset + i] = rng.uniform(-limit, limit);
    }
  }
  return Network(std::move(layers), std::move(params));
}

Network Network::with_params(WeightVector params) const {
  return Network(layers_, std::move(params));
}

Eigen::Map<const Matrix> Network::weights(std::size_t layer) const {
  const auto& slot = layout_.at(layer);
  return Eigen::Map<const Matrix>(params_.data() + slot.weight_offset,
                                  static_cast<Eigen::Index>(layers_[layer].input_dim),
                                  static_cast<Eigen::Index>(layers_[layer].output_dim));
}

Eigen::Map<const Eigen::RowVectorXd> Network::bias(std::size_t layer) const {
  const auto& slot = layout_.at(layer);
  return Eigen::Map<const Eigen::RowVectorXd>(params_.data() + slot.bias_offset,
                                              static_cast<Eigen::Index>(slot.bias_length));
}

std::vector<WeightVector> unflatten(const Network& net, std::span<const double> flat) {
  if (flat.size() != net.params().size()) {
    throw ShapeError("unflatten: vector length does not match network layout");
  }
  std::vector<WeightVector> blocks;
  for (const auto& slot : net.layout()) {
    blocks.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(slot.offset),
                        flat.begin() + static_cast<std::ptrdiff_t>(slot.offset + slot.length));
  }
  return blocks;
}

WeightVector flatten(std::span<const WeightVector> blocks) {
  WeightVector flat;
  for (const auto& block : blocks) flat.insert(flat.end(), block.begin(), block.end());
  return flat;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InputError("learning_rate must be a finite non-negative number");
  }
  if (batch_size == 0) throw InputError("batch_size must be positive");
  if (epochs == 0) throw InputError("epochs must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InputError("dropout_rate must be in [0, 1)");
  }
}

namespace {

struct ForwardTrace {
  std::vector<Matrix> inputs;      // input seen by layer l (after dropout)
  std::vector<Matrix> pre;         // pre-activation of layer l
  std::vector<Matrix> masks;       // scaled dropout mask on output of layer l
  Matrix output;
};

void softmax_rows(Matrix& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    const double m = row.maxCoeff();
    row = (row.array() - m).exp().matrix();
    row /= row.sum();
  }
}

void activate(Activation activation, Matrix& z) {
  switch (activation) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kIdentity:
      break;
    case Activation::kSoftmax:
      softmax_rows(z);
      break;
  }
}

void check_batch(const Network& net, const Matrix& batch) {
  if (static_cast<std::size_t>(batch.cols()) != net.input_dim()) {
    throw ShapeError("batch has " + std::to_string(batch.cols()) +
                     " columns, network expects " + std::to_string(net.input_dim()));
  }
}

// Dropout is applied to hidden-layer outputs only, and only when `rng` is
// given and the rate is positive.
ForwardTrace trace_forward(const Network& net, const Matrix& batch,
                           double dropout_rate, Rng* rng) {
  check_batch(net, batch);
  const std::size_t depth = net.layers().size();
  ForwardTrace trace;
  trace.inputs.reserve(depth);
  trace.pre.reserve(depth);
  trace.masks.resize(depth);
  Matrix current = batch;
  for (std::size_t l = 0; l < depth; ++l) {
    Matrix z = current * net.weights(l);
    z.rowwise() += net.bias(l);
    trace.inputs.push_back(std::move(current));
    trace.pre.push_back(z);
    activate(net.layers()[l].activation, z);
    if (l + 1 < depth && rng != nullptr && dropout_rate > 0.0) {
      const double keep_scale = 1.0 / (1.0 - dropout_rate);
      Matrix mask(z.rows(), z.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = rng->uniform() < dropout_rate ? 0.0 : keep_scale;
      }
      z = z.cwiseProduct(mask);
      trace.masks[l] = std::move(mask);
    }
    current = std::move(z);
  }
  trace.output = std::move(current);
  return trace;
}

Matrix activation_derivative(Activation activation, const Matrix& pre) {
  switch (activation) {
    case Activation::kRelu:
      return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::kIdentity:
      return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::kSoftmax:
      break;
  }
  throw InputError("softmax derivative is only defined jointly with cross-entropy");
}

// `d_pre` is the loss gradient with respect to the final layer's
// pre-activation.
WeightVector backpropagate(const Network& net, const ForwardTrace& trace, Matrix d_pre) {
  WeightVector grad(net.params().size(), 0.0);
  for (std::size_t l = net.layers().size(); l-- > 0;) {
    const auto& slot = net.layout()[l];
    Eigen::Map<Matrix> d_weights(grad.data() + slot.weight_offset,
                                 static_cast<Eigen::Index>(net.layers()[l].input_dim),
                                 static_cast<Eigen::Index>(net.layers()[l].output_dim));
    Eigen::Map<Eigen::RowVectorXd> d_bias(grad.data() + slot.bias_offset,
                                          static_cast<Eigen::Index>(slot.bias_length));
    d_weights.noalias() = trace.inputs[l].transpose() * d_pre;
    d_bias = d_pre.colwise().sum();
    if (l == 0) break;
    Matrix d_act = d_pre * net.weights(l).transpose();
    if (trace.masks[l - 1].size() > 0) d_act = d_act.cwiseProduct(trace.masks[l - 1]);
    d_pre = d_act.cwiseProduct(
        activation_derivative(net.layers()[l - 1].activation, trace.pre[l - 1]));
  }
  return grad;
}

void check_labels(const Network& net, const Matrix& inputs, std::span<const int> labels) {
  if (net.layers().back().activation != Activation::kSoftmax) {
    throw InputError("classification requires a softmax output layer");
  }
  if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
    throw ShapeError("label count does not match batch rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= net.output_dim()) {
      throw InputError("label " + std::to_string(y) + " outside output dimension");
    }
  }
}

void check_targets(const Network& net, const Matrix& inputs, const Matrix& targets) {
  if (net.layers().back().activation == Activation::kSoftmax) {
    throw InputError("reconstruction requires a non-softmax output layer");
  }
  if (targets.rows() != inputs.rows() ||
      static_cast<std::size_t>(targets.cols()) != net.output_dim()) {
    throw ShapeError("target matrix shape does not match network output");
  }
}

WeightVector classification_gradient_impl(const Network& net, const Matrix& inputs,
                                          std::span<const int> labels,
                                          double dropout_rate, Rng* rng) {
  check_labels(net, inputs, labels);
  ForwardTrace trace = trace_forward(net, inputs, dropout_rate, rng);
  Matrix d_pre = trace.output;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    d_pre(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
  }
  d_pre /= static_cast<double>(inputs.rows());
  return backpropagate(net, trace, std::move(d_pre));
}

WeightVector reconstruction_gradient_impl(const Network& net, const Matrix& inputs,
                                          const Matrix& targets, double dropout_rate,
                                          Rng* rng) {
  check_targets(net, inputs, targets);
  ForwardTrace trace = trace_forward(net, inputs, dropout_rate, rng);
  const double scale = 2.0 / static_cast<double>(targets.size());
  Matrix d_pre = (trace.output - targets) * scale;
  d_pre = d_pre.cwiseProduct(
      activation_derivative(net.layers().back().activation, trace.pre.back()));
  return backpropagate(net, trace, std::move(d_pre));
}

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = source.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

void apply_delta(WeightVector& params, const WeightVector& delta) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] += delta[i];
}

// Shared mini-batch loop. `step` maps a list of row indices to a gradient.
template <typename GradientFn>
Network run_epoch(const Network& net, std::size_t rows, const TrainConfig& cfg,
                  Direction direction, std::size_t epoch_index, GradientFn&& step) {
  cfg.validate();
  if (rows == 0) throw InputError("cannot train on an empty dataset");
  Rng rng(split_seed(cfg.rng_seed, {static_cast<std::uint64_t>(epoch_index)}));
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  WeightVector params = net.params();
  for (std::size_t start = 0; start < rows; start += cfg.batch_size) {
    const std::size_t stop = std::min(rows, start + cfg.batch_size);
    std::span<const std::size_t> batch(order.data() + start, stop - start);
    const Network current = net.with_params(params);
    const WeightVector grad = step(current, batch, rng);
    apply_delta(params, sgd_step_delta(grad, cfg.learning_rate, direction));
  }
  return net.with_params(std::move(params));
}

}  // namespace

Matrix forward(const Network& net, const Matrix& batch) {
  return trace_forward(net, batch, 0.0, nullptr).output;
}

double mse_loss(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("mse_loss: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

double classification_loss(const Network& net, const Matrix& inputs,
                           std::span<const int> labels) {
  check_labels(net, inputs, labels);
  if (labels.empty()) throw InputError("classification_loss: empty batch");
  const ForwardTrace trace = trace_forward(net, inputs, 0.0, nullptr);
  const Matrix& logits = trace.pre.back();
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    total += lse - logits(r, labels[static_cast<std::size_t>(r)]);
  }
  return total / static_cast<double>(logits.rows());
}

double reconstruction_loss(const Network& net, const Matrix& inputs, const Matrix& targets) {
  check_targets(net, inputs, targets);
  if (targets.size() == 0) throw InputError("reconstruction_loss: empty batch");
  const Matrix out = forward(net, inputs);
  return (out - targets).squaredNorm() / static_cast<double>(targets.size());
}

WeightVector classification_gradient(const Network& net, const Matrix& inputs,
                                     std::span<const int> labels) {
  return classification_gradient_impl(net, inputs, labels, 0.0, nullptr);
}

WeightVector reconstruction_gradient(const Network& net, const Matrix& inputs,
                                     const Matrix& targets) {
  return reconstruction_gradient_impl(net, inputs, targets, 0.0, nullptr);
}

WeightVector sgd_step_delta(std::span<const double> gradient, double learning_rate,
                            Direction direction) {
  WeightVector delta(gradient.size());
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    const double step = learning_rate * gradient[i];
    delta[i] = direction == Direction::kDescent ? -step : step;
  }
  return delta;
}

Network sgd_epoch(const Network& net, const LabeledDataset& data, const TrainConfig& cfg,
                  Direction direction, std::size_t epoch_index) {
  if (static_cast<std::size_t>(data.features.rows()) != data.labels.size()) {
    throw ShapeError("dataset feature rows and label count differ");
  }
  return run_epoch(
      net, data.size(), cfg, direction, epoch_index,
      [&](const Network& current, std::span<const std::size_t> rows, Rng& rng) {
        const Matrix x = gather_rows(data.features, rows);
        std::vector<int> y(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) y[i] = data.labels[rows[i]];
        return classification_gradient_impl(current, x, y, cfg.dropout_rate, &rng);
      });
}

Network train(const Network& net, const LabeledDataset& data, const TrainConfig& cfg,
              Direction direction) {
  cfg.validate();
  Network current = net;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    current = sgd_epoch(current, data, cfg, direction, e);
  }
  return current;
}

Network sgd_epoch_reconstruction(const Network& net, const Matrix& data,
                                 const TrainConfig& cfg, std::size_t epoch_index) {
  return run_epoch(
      net, static_cast<std::size_t>(data.rows()), cfg, Direction::kDescent, epoch_index,
      [&](const Network& current, std::span<const std::size_t> rows, Rng& rng) {
        const Matrix x = gather_rows(data, rows);
        return reconstruction_gradient_impl(current, x, x, cfg.dropout_rate, &rng);
      });
}

Network train_reconstruction(const Network& net, const Matrix& data, const TrainConfig& cfg) {
  cfg.validate();
  Network current = net;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    current = sgd_epoch_reconstruction(current, data, cfg, e);
  }
  return current;
}

Evaluation evaluate(const Network& net, const LabeledDataset& data) {
  if (data.size() == 0) throw InputError("evaluate: empty dataset");
  check_labels(net, data.features, data.labels);
  const ForwardTrace trace = trace_forward(net, data.features, 0.0, nullptr);
  const Matrix& logits = trace.pre.back();
  double loss = 0.0;
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (!logits.row(r).allFinite()) {
      // Diverged model: count the sample as wrong with unbounded loss.
      loss = std::numeric_limits<double>::infinity();
      continue;
    }
    Eigen::Index best = 0;
    const double m = logits.row(r).maxCoeff(&best);
    const int y = data.labels[static_cast<std::size_t>(r)];
    loss += m + std::log((logits.row(r).array() - m).exp().sum()) - logits(r, y);
    if (best == y) ++correct;
  }
  const double n = static_cast<double>(data.size());
  return Evaluation{loss / n, static_cast<double>(correct) / n};
}

}  // namespace fedwatch
