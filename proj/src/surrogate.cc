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

#include "fedwatch/surrogate.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedwatch/errors.h"
#include "fedwatch/rng.h"

namespace fedwatch {

std::string_view to_string(SurrogateMode mode) {
  return mode == SurrogateMode::kLayerSlice ? "layer_slice" : "random_indices";
}

SurrogateMode parse_surrogate_mode(std::string_view name) {
  if (name == "layer_slice") return SurrogateMode::kLayerSlice;
  if (name == "random_indices") return SurrogateMode::kRandomIndices;
  throw InputError("unknown surrogate mode '" + std::string(name) + "'");
}

std::size_t last_hidden_layer(std::span<const LayerSpec> layers) {
  return layers.size() >= 2 ? layers.size() - 2 : 0;
}

std::size_t surrogate_source_size(std::span<const LayerSpec> layers, SurrogateMode mode,
                                  std::size_t source_layer) {
  if (mode == SurrogateMode::kRandomIndices) {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.param_count();
    return n;
  }
  if (source_layer >= layers.size()) {
    throw InputError("source_layer " + std::to_string(source_layer) + " out of range");
  }
  return layers[source_layer].input_dim * layers[source_layer].output_dim;
}

SurrogateSpec build_surrogate_spec(std::span<const LayerSpec> layers, SurrogateMode mode,
                                   std::size_t target_dim, std::size_t source_layer,
                                   std::uint64_t seed) {
  const std::size_t source_size = surrogate_source_size(layers, mode, source_layer);
  if (target_dim == 0) throw InputError("surrogate target_dim must be positive");
  if (target_dim > source_size) {
    throw InputError("surrogate target_dim " + std::to_string(target_dim) +
                     " exceeds source size " + std::to_string(source_size));
  }
  const auto layout = make_layout(layers);
  const std::size_t base =
      mode == SurrogateMode::kLayerSlice ? layout[source_layer].weight_offset : 0;

  SurrogateSpec spec;
  spec.mode = mode;
  spec.target_dim = target_dim;
  spec.source_layer = mode == SurrogateMode::kLayerSlice ? source_layer : 0;
  spec.param_count = layout.back().offset + layout.back().length;
  Rng rng(seed);
  spec.index_set = rng.sample_without_replacement(source_size, target_dim);
  for (auto& index : spec.index_set) index += base;
  return spec;
}

SurrogateVector extract(const SurrogateSpec& spec, std::span<const double> weights) {
  if (weights.size() != spec.param_count) {
    throw ShapeError("extract: weight vector has " + std::to_string(weights.size()) +
                     " entries, surrogate spec expects " +
                     std::to_string(spec.param_count));
  }
  SurrogateVector out(spec.index_set.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = weights[spec.index_set[i]];
  return out;
}

Standardizer::Standardizer(std::size_t dim) : mean_(dim, 0.0), scale_(dim, 1.0) {}

Standardizer Standardizer::fit(std::span<const SurrogateVector> samples) {
  if (samples.empty()) throw InputError("Standardizer::fit: no samples");
  const std::size_t dim = samples.front().size();
  Standardizer s(dim);
  for (const auto& x : samples) {
    if (x.size() != dim) throw InputError("Standardizer::fit: ragged samples");
    for (std::size_t d = 0; d < dim; ++d) s.mean_[d] += x[d];
  }
  const double n = static_cast<double>(samples.size());
  for (auto& m : s.mean_) m /= n;
  std::vector<double> var(dim, 0.0);
  for (const auto& x : samples) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double c = x[d] - s.mean_[d];
      var[d] += c * c;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    s.scale_[d] = std::max(std::sqrt(var[d] / n), kMinScale);
  }
  return s;
}

SurrogateVector Standardizer::apply(std::span<const double> surrogate) const {
  if (surrogate.size() != mean_.size()) {
    throw ShapeError("Standardizer::apply: dimension mismatch");
  }
  SurrogateVector out(surrogate.size());
  for (std::size_t d = 0; d < out.size(); ++d) {
    out[d] = (surrogate[d] - mean_[d]) / scale_[d];
  }
  return out;
}

}  // namespace fedwatch
