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

#ifndef FEDWATCH_DATASET_H_
#define FEDWATCH_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>

#include "fedwatch/nn.h"

namespace fedwatch {

// Gaussian class clusters. Class means are drawn from N(0, I); each sample
// is its class mean plus N(0, noise_std^2 I), and every feature is then
// scaled by scale/sqrt(input_dim) so a class mean has expected norm
// `scale`.
// Labels are assigned round-robin before shuffling, so class counts differ
// by at most one.
LabeledDataset generate_synthetic_dataset(std::size_t classes, std::size_t samples,
                                          std::size_t input_dim, double noise_std,
                                          std::uint64_t seed, double scale = 1.0);

// Small image datasets in a flat binary format, all integers little-endian
// uint32:
//
//   count, height, width, classes
//   count * height * width pixel bytes, row-major per image
//   count label bytes
//
// Pixels are scaled to [0, 1]. Throws InputError on a malformed file.
LabeledDataset load_image_dataset(const std::filesystem::path& path);

// Writes `data` in the format above. Features are clamped to [0, 1] and
// quantized to bytes; `height * width` must equal the feature count.
void save_image_dataset(const std::filesystem::path& path, const LabeledDataset& data,
                        std::uint32_t height, std::uint32_t width, std::uint32_t classes);

// Seeded shuffle, then the first round(test_fraction * n) samples become the
// test set. Returns {train, test}.
std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& data,
                                                           double test_fraction,
                                                           std::uint64_t seed);

std::size_t count_classes(const LabeledDataset& data);

}  // namespace fedwatch

#endif  // FEDWATCH_DATASET_H_
