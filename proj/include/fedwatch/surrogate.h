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

// Low-dimensional surrogates of weight vectors: a fixed gather of selected
// coordinates, plus optional per-dimension standardization.

#ifndef FEDWATCH_SURROGATE_H_
#define FEDWATCH_SURROGATE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fedwatch/nn.h"

namespace fedwatch {

using SurrogateVector = std::vector<double>;

enum class SurrogateMode { kRandomIndices, kLayerSlice };

std::string_view to_string(SurrogateMode mode);
SurrogateMode parse_surrogate_mode(std::string_view name);

struct SurrogateSpec {
  SurrogateMode mode = SurrogateMode::kLayerSlice;
  std::size_t target_dim = 0;
  std::size_t source_layer = 0;
  // Length of the weight vectors this spec applies to.
  std::size_t param_count = 0;
  // Sorted, distinct absolute indices into the weight vector.
  std::vector<std::size_t> index_set;

  friend bool operator==(const SurrogateSpec&, const SurrogateSpec&) = default;
};

// Index of the layer whose weights feed the last hidden representation
// (the layer before the output layer); 0 for single-layer nets.
std::size_t last_hidden_layer(std::span<const LayerSpec> layers);

// Number of coordinates `mode` samples from. For kLayerSlice that is the
// weight block (biases excluded) of `source_layer`; for kRandomIndices it
// is the whole vector.
std::size_t surrogate_source_size(std::span<const LayerSpec> layers, SurrogateMode mode,
                                  std::size_t source_layer);

// Samples `target_dim` coordinates without replacement from the source
// range. Throws InputError when target_dim is zero or exceeds the range.
SurrogateSpec build_surrogate_spec(std::span<const LayerSpec> layers, SurrogateMode mode,
                                   std::size_t target_dim, std::size_t source_layer,
                                   std::uint64_t seed);

// out[i] = weights[index_set[i]]. Throws ShapeError on a layout mismatch.
SurrogateVector extract(const SurrogateSpec& spec, std::span<const double> weights);

// Per-dimension z-scoring with statistics frozen at fit time.
class Standardizer {
 public:
  static constexpr double kMinScale = 1e-8;

  // Identity transform of the given width.
  explicit Standardizer(std::size_t dim = 0);

  // Mean and population standard deviation of each dimension; scales below
  // kMinScale are clamped. Throws InputError on an empty or ragged set.
  static Standardizer fit(std::span<const SurrogateVector> samples);

  SurrogateVector apply(std::span<const double> surrogate) const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

}  // namespace fedwatch

#endif  // FEDWATCH_SURROGATE_H_
