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

// Small fully connected network kernel: forward pass, backpropagation and
// plain mini-batch SGD. Shared by the client classifiers and the server-side
// autoencoder.

#ifndef FEDWATCH_NN_H_
#define FEDWATCH_NN_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace fedwatch {

// Row-major so one sample is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Flat model parameters. Interpretation is given by a Network's layout.
using WeightVector = std::vector<double>;

enum class Activation { kRelu, kIdentity, kSoftmax };

std::string_view to_string(Activation activation);

struct LayerSpec {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::kRelu;

  std::size_t param_count() const { return input_dim * output_dim + output_dim; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Location of one layer's parameters inside the flat vector. The weight
// block is input_dim x output_dim, row-major, followed by the bias.
struct LayerSlot {
  std::size_t offset = 0;
  std::size_t length = 0;
  std::size_t weight_offset = 0;
  std::size_t weight_length = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_length = 0;
};

std::vector<LayerSlot> make_layout(std::span<const LayerSpec> layers);

// Immutable network value: architecture plus flattened parameters.
class Network {
 public:
  // Throws ShapeError if `params` does not match the architecture and
  // InputError on an invalid architecture.
  Network(std::vector<LayerSpec> layers, WeightVector params);

  // Glorot-uniform weights, zero biases.
  static Network initialize(std::vector<LayerSpec> layers, std::uint64_t seed);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<LayerSlot>& layout() const { return layout_; }
  const WeightVector& params() const { return params_; }
  std::size_t input_dim() const { return layers_.front().input_dim; }
  std::size_t output_dim() const { return layers_.back().output_dim; }

  Network with_params(WeightVector params) const;

  // input_dim x output_dim view of a layer's weight block.
  Eigen::Map<const Matrix> weights(std::size_t layer) const;
  Eigen::Map<const Eigen::RowVectorXd> bias(std::size_t layer) const;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<LayerSlot> layout_;
  WeightVector params_;
};

// Splits a flat vector into per-layer parameter blocks and back.
std::vector<WeightVector> unflatten(const Network& net, std::span<const double> flat);
WeightVector flatten(std::span<const WeightVector> blocks);

enum class Direction { kDescent, kAscent };

struct TrainConfig {
  double learning_rate = 0.06;
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  double dropout_rate = 0.0;
  std::uint64_t rng_seed = 0;

  // Throws InputError naming the bad field.
  void validate() const;
};

struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

Matrix forward(const Network& net, const Matrix& batch);

// ||a - b||^2.
double mse_loss(std::span<const double> a, std::span<const double> b);

// Mean softmax cross-entropy. Requires a softmax output layer.
double classification_loss(const Network& net, const Matrix& inputs,
                           std::span<const int> labels);

// Mean over samples and output units of the squared reconstruction
// residual. Used as the autoencoder training objective.
double reconstruction_loss(const Network& net, const Matrix& inputs,
                           const Matrix& targets);

// Analytic gradients of the two losses above with respect to params().
WeightVector classification_gradient(const Network& net, const Matrix& inputs,
                                     std::span<const int> labels);
WeightVector reconstruction_gradient(const Network& net, const Matrix& inputs,
                                     const Matrix& targets);

// The parameter change applied by one SGD step: -lr * g for descent and
// +lr * g for ascent.
WeightVector sgd_step_delta(std::span<const double> gradient, double learning_rate,
                            Direction direction);

// One pass over `data` in mini-batches. The sample order is a fresh
// shuffle drawn from split_seed(cfg.rng_seed, {epoch_index}).
Network sgd_epoch(const Network& net, const LabeledDataset& data,
                  const TrainConfig& cfg, Direction direction,
                  std::size_t epoch_index = 0);

// cfg.epochs calls to sgd_epoch with epoch_index 0, 1, ...
Network train(const Network& net, const LabeledDataset& data,
              const TrainConfig& cfg, Direction direction = Direction::kDescent);

// Reconstruction variants: each row of `data` is both input and target.
Network sgd_epoch_reconstruction(const Network& net, const Matrix& data,
                                 const TrainConfig& cfg,
                                 std::size_t epoch_index = 0);
Network train_reconstruction(const Network& net, const Matrix& data,
                             const TrainConfig& cfg);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate(const Network& net, const LabeledDataset& data);

}  // namespace fedwatch

#endif  // FEDWATCH_NN_H_
