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

#include "fedwatch/dataset.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "fedwatch/errors.h"
#include "fedwatch/rng.h"

namespace fedwatch {

LabeledDataset generate_synthetic_dataset(std::size_t classes, std::size_t samples,
                                          std::size_t input_dim, double noise_std,
                                          std::uint64_t seed, double scale) {
  if (classes == 0 || samples == 0 || input_dim == 0) {
    throw InputError("synthetic dataset needs positive classes, samples and input_dim");
  }
  if (!(noise_std >= 0.0)) throw InputError("noise_std must be non-negative");
  if (!(scale > 0.0)) throw InputError("scale must be positive");
  Rng rng(seed);
  Matrix means(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(input_dim));
  for (Eigen::Index i = 0; i < means.size(); ++i) means.data()[i] = rng.normal();

  std::vector<int> labels(samples);
  for (std::size_t i = 0; i < samples; ++i) labels[i] = static_cast<int>(i % classes);
  rng.shuffle(std::span<int>(labels));

  const double factor = scale / std::sqrt(static_cast<double>(input_dim));
  LabeledDataset data;
  data.features.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(input_dim));
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t d = 0; d < input_dim; ++d) {
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          factor * (means(labels[i], static_cast<Eigen::Index>(d)) + noise_std * rng.normal());
    }
  }
  data.labels = std::move(labels);
  return data;
}

namespace {

std::uint32_t read_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw InputError("image dataset: truncated header");
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

}  // namespace

LabeledDataset load_image_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image dataset " + path.string());
  const std::uint32_t count = read_u32(in);
  const std::uint32_t height = read_u32(in);
  const std::uint32_t width = read_u32(in);
  const std::uint32_t classes = read_u32(in);
  if (count == 0 || height == 0 || width == 0 || classes == 0 || classes > 256) {
    throw InputError("image dataset: invalid header in " + path.string());
  }
  const std::size_t pixels = static_cast<std::size_t>(height) * width;
  std::vector<unsigned char> raw(static_cast<std::size_t>(count) * pixels);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw InputError("image dataset: truncated pixel block");
  }
  std::vector<unsigned char> labels(count);
  if (!in.read(reinterpret_cast<char*>(labels.data()), count)) {
    throw InputError("image dataset: truncated label block");
  }
  LabeledDataset data;
  data.features.resize(count, static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < raw.size(); ++i) data.features.data()[i] = raw[i] / 255.0;
  data.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (labels[i] >= classes) throw InputError("image dataset: label exceeds class count");
    data.labels[i] = labels[i];
  }
  return data;
}

void save_image_dataset(const std::filesystem::path& path, const LabeledDataset& data,
                        std::uint32_t height, std::uint32_t width, std::uint32_t classes) {
  if (static_cast<std::size_t>(height) * width != static_cast<std::size_t>(data.features.cols())) {
    throw ShapeError("height * width does not match feature count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write image dataset " + path.string());
  write_u32(out, static_cast<std::uint32_t>(data.size()));
  write_u32(out, height);
  write_u32(out, width);
  write_u32(out, classes);
  for (Eigen::Index i = 0; i < data.features.size(); ++i) {
    const double v = std::clamp(data.features.data()[i], 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  for (int y : data.labels) out.put(static_cast<char>(static_cast<unsigned char>(y)));
}

std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& data,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InputError("test_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(data.size())));
  if (n_test == 0 || n_test >= data.size()) {
    throw InputError("test split leaves an empty train or test set");
  }
  auto take = [&](std::size_t begin, std::size_t end) {
    LabeledDataset out;
    out.features.resize(static_cast<Eigen::Index>(end - begin), data.features.cols());
    out.labels.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      out.features.row(static_cast<Eigen::Index>(i - begin)) =
          data.features.row(static_cast<Eigen::Index>(order[i]));
      out.labels[i - begin] = data.labels[order[i]];
    }
    return out;
  };
  return {take(n_test, data.size()), take(0, n_test)};
}

std::size_t count_classes(const LabeledDataset& data) {
  int most = -1;
  for (int y : data.labels) most = std::max(most, y);
  return static_cast<std::size_t>(most + 1);
}

}  // namespace fedwatch
