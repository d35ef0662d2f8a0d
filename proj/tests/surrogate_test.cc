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
#include <vector>

#include <gtest/gtest.h>

#include "fedwatch/attacks.h"
#include "fedwatch/errors.h"
#include "test_util.h"

namespace fedwatch {
namespace {

std::vector<LayerSpec> mlp() {
  return {{20, 32, Activation::kRelu}, {32, 16, Activation::kRelu},
          {16, 10, Activation::kSoftmax}};
}

std::size_t total_params(const std::vector<LayerSpec>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

TEST(SurrogateTest, GatherExample) {
  SurrogateSpec spec;
  spec.mode = SurrogateMode::kRandomIndices;
  spec.target_dim = 3;
  spec.param_count = 6;
  spec.index_set = {0, 2, 4};
  EXPECT_EQ(extract(spec, std::vector<double>{10, 20, 30, 40, 50, 60}),
            (std::vector<double>{10, 30, 50}));
}

TEST(SurrogateTest, LayoutMismatchThrows) {
  const auto spec = build_surrogate_spec(mlp(), SurrogateMode::kLayerSlice, 8, 1, 3);
  EXPECT_THROW(extract(spec, std::vector<double>(10)), ShapeError);
}

TEST(SurrogateTest, LastHiddenLayer) {
  EXPECT_EQ(last_hidden_layer(mlp()), 1u);
  const std::vector<LayerSpec> single{{4, 2, Activation::kSoftmax}};
  EXPECT_EQ(last_hidden_layer(single), 0u);
}

TEST(SurrogateTest, LayerSliceStaysInsideWeightBlock) {
  const auto layers = mlp();
  const auto net = Network::initialize(layers, 1);
  const auto& slot = net.layout()[1];
  EXPECT_EQ(surrogate_source_size(layers, SurrogateMode::kLayerSlice, 1), 32u * 16);
  const auto spec = build_surrogate_spec(layers, SurrogateMode::kLayerSlice, 100, 1, 9);
  ASSERT_EQ(spec.index_set.size(), 100u);
  EXPECT_TRUE(std::is_sorted(spec.index_set.begin(), spec.index_set.end()));
  EXPECT_EQ(std::adjacent_find(spec.index_set.begin(), spec.index_set.end()),
            spec.index_set.end());
  for (auto i : spec.index_set) {
    EXPECT_GE(i, slot.weight_offset);
    EXPECT_LT(i, slot.weight_offset + slot.weight_length);
  }
}

TEST(SurrogateTest, FullRangeTakesEveryIndex) {
  const auto layers = mlp();
  const std::size_t n = total_params(layers);
  const auto spec = build_surrogate_spec(layers, SurrogateMode::kRandomIndices, n, 0, 4);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(spec.index_set[i], i);
}

TEST(SurrogateTest, TooLargeTargetRejected) {
  EXPECT_THROW(build_surrogate_spec(mlp(), SurrogateMode::kLayerSlice, 32 * 16 + 1, 1, 4),
               InputError);
  EXPECT_THROW(build_surrogate_spec(mlp(), SurrogateMode::kLayerSlice, 0, 1, 4), InputError);
}

TEST(SurrogateTest, ThreeThousandFromLargeLayer) {
  const std::vector<LayerSpec> layers{{64, 128, Activation::kRelu},
                                      {128, 10, Activation::kSoftmax}};
  const auto spec = build_surrogate_spec(layers, SurrogateMode::kLayerSlice, 3000, 0, 17);
  EXPECT_EQ(spec.index_set.size(), 3000u);
  EXPECT_LT(spec.index_set.back(), 64u * 128);
}

TEST(SurrogateTest, DeterministicPerSeed) {
  const auto a = build_surrogate_spec(mlp(), SurrogateMode::kRandomIndices, 50, 0, 42);
  const auto b = build_surrogate_spec(mlp(), SurrogateMode::kRandomIndices, 50, 0, 42);
  const auto c = build_surrogate_spec(mlp(), SurrogateMode::kRandomIndices, 50, 0, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.index_set, c.index_set);
}

TEST(SurrogateTest, ExtractIsLinearAndCommutesWithSignFlip) {
  const auto layers = mlp();
  const std::size_t n = total_params(layers);
  const auto spec = build_surrogate_spec(layers, SurrogateMode::kRandomIndices, 64, 0, 5);
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = testing::random_vector(rng, n);
    const auto b = testing::random_vector(rng, n);
    std::vector<double> sum(n);
    for (std::size_t i = 0; i < n; ++i) sum[i] = a[i] + b[i];
    const auto ea = extract(spec, a);
    const auto eb = extract(spec, b);
    const auto esum = extract(spec, sum);
    for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_EQ(esum[i], ea[i] + eb[i]);

    const auto flipped = extract(spec, apply_sign_flip(a));
    for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_EQ(flipped[i], -ea[i]);
  }
}

TEST(SurrogateTest, ExtractMatchesIndexLoop) {
  const auto layers = mlp();
  const std::size_t n = total_params(layers);
  const auto spec = build_surrogate_spec(layers, SurrogateMode::kLayerSlice, 200, 0, 8);
  Rng rng(10);
  const auto w = testing::random_vector(rng, n);
  const auto out = extract(spec, w);
  for (std::size_t i = 0; i < spec.index_set.size(); ++i) EXPECT_EQ(out[i], w[spec.index_set[i]]);
}

TEST(StandardizerTest, ZScoresWithClampedScale) {
  const std::vector<SurrogateVector> samples{{1.0, 5.0}, {3.0, 5.0}};
  const auto s = Standardizer::fit(samples);
  EXPECT_EQ(s.mean(), (std::vector<double>{2.0, 5.0}));
  EXPECT_EQ(s.scale()[0], 1.0);
  EXPECT_EQ(s.scale()[1], Standardizer::kMinScale);
  EXPECT_EQ(s.apply(std::vector<double>{4.0, 5.0}), (std::vector<double>{2.0, 0.0}));
  EXPECT_THROW(s.apply(std::vector<double>{1.0}), ShapeError);
}

TEST(StandardizerTest, DefaultIsIdentity) {
  const Standardizer s(3);
  const std::vector<double> v{1.5, -2.0, 0.25};
  EXPECT_EQ(s.apply(v), v);
}

}  // namespace
}  // namespace fedwatch
