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

#include "fedwatch/detector.h"

#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "fedwatch/errors.h"
#include "fedwatch/rng.h"
#include "test_util.h"

namespace fedwatch {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(AnomalyScoreTest, AllEqualErrorsScoreOne) {
  const auto a = anomaly_scores({{1, 0.2}, {2, 0.2}});
  EXPECT_EQ(a.at(1), 1.0);
  EXPECT_EQ(a.at(2), 1.0);
}

TEST(AnomalyScoreTest, HandSubstitution) {
  // sigma = 0.2: A_b = 1.8 / 1.2 = 1.5.
  const auto a = anomaly_scores({{1, 0.2}, {2, 0.8}});
  EXPECT_EQ(a.at(1), 1.0);
  EXPECT_NEAR(a.at(2), 1.5, 1e-15);
}

TEST(AnomalyScoreTest, SingleClientIsOne) {
  EXPECT_EQ(anomaly_scores({{7, 123.0}}).at(7), 1.0);
}

TEST(AnomalyScoreTest, EmptyAndNegativeRejected) {
  EXPECT_THROW(anomaly_scores({}), InputError);
  EXPECT_THROW(anomaly_scores({{1, -0.1}}), InputError);
}

TEST(AnomalyScoreTest, FloorIsExactlyOneOnRandomMaps) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreMap errors;
    const std::size_t k = 1 + rng.uniform_index(30);
    for (std::size_t i = 0; i < k; ++i) errors[static_cast<int>(i)] = rng.uniform(0.0, 1e3);
    const auto a = anomaly_scores(errors);
    double lowest = kInf;
    for (const auto& [id, v] : a) {
      EXPECT_GE(v, 1.0);
      lowest = std::min(lowest, v);
    }
    EXPECT_EQ(lowest, 1.0);
  }
}

TEST(AnomalyScoreTest, InfiniteErrorsRankLast) {
  const auto a = anomaly_scores({{1, 0.5}, {2, kInf}});
  EXPECT_EQ(a.at(1), 1.0);
  EXPECT_EQ(a.at(2), kInf);
  const auto all_inf = anomaly_scores({{1, kInf}, {2, kInf}});
  EXPECT_EQ(all_inf.at(1), 1.0);
  EXPECT_EQ(all_inf.at(2), 1.0);
}

TEST(CreditScoreTest, HandComputedExample) {
  const auto alpha = credit_scores({{1, 1.0}, {2, 2.0}}, {{1, 1}, {2, 1}}, 2.0);
  EXPECT_NEAR(alpha.at(1), 0.8, 1e-15);
  EXPECT_NEAR(alpha.at(2), 0.2, 1e-15);
}

TEST(CreditScoreTest, ReducesToSampleWeights) {
  const CountMap n{{1, 10}, {2, 30}, {3, 60}};
  const auto equal = credit_scores({{1, 1.7}, {2, 1.7}, {3, 1.7}}, n, 2.0);
  const auto l0 = credit_scores({{1, 1.0}, {2, 4.0}, {3, 9.0}}, n, 0.0);
  for (const auto& [id, count] : n) {
    EXPECT_NEAR(equal.at(id), static_cast<double>(count) / 100.0, 1e-15);
    EXPECT_NEAR(l0.at(id), static_cast<double>(count) / 100.0, 1e-15);
  }
}

TEST(CreditScoreTest, NormalizedAndBounded) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreMap a;
    CountMap n;
    const std::size_t k = 1 + rng.uniform_index(25);
    for (std::size_t i = 0; i < k; ++i) {
      a[static_cast<int>(i)] = 1.0 + rng.uniform(0.0, 50.0);
      n[static_cast<int>(i)] = 1 + rng.uniform_index(500);
    }
    const auto alpha = credit_scores(a, n, rng.uniform(0.0, 4.0));
    double sum = 0.0;
    for (const auto& [id, v] : alpha) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(CreditScoreTest, MonotonePenalty) {
  const CountMap n{{1, 5}, {2, 7}, {3, 9}};
  double previous = 1.0;
  for (double a1 : {1.0, 1.5, 2.0, 4.0, 16.0}) {
    const double alpha = credit_scores({{1, a1}, {2, 1.2}, {3, 1.0}}, n, 2.0).at(1);
    EXPECT_LT(alpha, previous);
    previous = alpha;
  }
}

TEST(CreditScoreTest, KeyMismatchRejected) {
  EXPECT_THROW(credit_scores({{1, 1.0}}, {{2, 1}}, 2.0), InputError);
  EXPECT_THROW(credit_scores({{1, 1.0}, {2, 1.0}}, {{1, 1}}, 2.0), InputError);
}

TEST(ThresholdTest, MeanRuleFlagsAboveMean) {
  const auto r = threshold_credit_scores({{1, 1.0}, {2, 1.0}, {3, 3.0}},
                                         {{1, 1}, {2, 3}, {3, 4}}, ThresholdRule::mean());
  EXPECT_NEAR(r.threshold, 5.0 / 3.0, 1e-15);
  EXPECT_FALSE(r.flagged.at(1));
  EXPECT_FALSE(r.flagged.at(2));
  EXPECT_TRUE(r.flagged.at(3));
  EXPECT_EQ(r.alpha.at(3), 0.0);
  EXPECT_NEAR(r.alpha.at(1), 0.25, 1e-15);
  EXPECT_NEAR(r.alpha.at(2), 0.75, 1e-15);
  EXPECT_NEAR(r.unnormalized_alpha_sum, 0.5, 1e-15);
}

TEST(ThresholdTest, WithoutRenormalizingKeepsRawShares) {
  const auto r = threshold_credit_scores({{1, 1.0}, {2, 1.0}, {3, 3.0}},
                                         {{1, 1}, {2, 3}, {3, 4}}, ThresholdRule::mean(),
                                         /*renormalize=*/false);
  EXPECT_NEAR(r.alpha.at(1), 0.125, 1e-15);
  EXPECT_NEAR(r.alpha.at(2), 0.375, 1e-15);
}

TEST(ThresholdTest, AllEqualFlagsNobody) {
  const auto r = threshold_credit_scores({{1, 1.0}, {2, 1.0}, {3, 1.0}},
                                         {{1, 2}, {2, 2}, {3, 4}}, ThresholdRule::mean());
  for (const auto& [id, f] : r.flagged) EXPECT_FALSE(f);
  EXPECT_NEAR(r.alpha.at(3), 0.5, 1e-15);
  EXPECT_EQ(r.unnormalized_alpha_sum, 1.0);
}

TEST(ThresholdTest, MedianAndFixedRules) {
  const ScoreMap a{{1, 1.0}, {2, 1.2}, {3, 2.0}, {4, 9.0}};
  const CountMap n{{1, 1}, {2, 1}, {3, 1}, {4, 1}};
  const auto median = threshold_credit_scores(a, n, ThresholdRule::median());
  EXPECT_NEAR(median.threshold, 1.6, 1e-15);
  EXPECT_TRUE(median.flagged.at(3));
  EXPECT_FALSE(median.flagged.at(2));
  const auto fixed = threshold_credit_scores(a, n, ThresholdRule::fixed(5.0));
  EXPECT_TRUE(fixed.flagged.at(4));
  EXPECT_FALSE(fixed.flagged.at(3));
  EXPECT_THROW(ThresholdRule::fixed(0.5), InputError);
}

TEST(ThresholdTest, InfiniteScoresExcludedFromMeanAndFlagged) {
  const auto r = threshold_credit_scores({{1, 1.0}, {2, 2.0}, {3, kInf}},
                                         {{1, 1}, {2, 1}, {3, 1}}, ThresholdRule::mean());
  EXPECT_EQ(r.threshold, 1.5);
  EXPECT_TRUE(r.flagged.at(2));
  EXPECT_TRUE(r.flagged.at(3));
  EXPECT_EQ(r.alpha.at(1), 1.0);
}

TEST(ThresholdTest, ArgminAlwaysSurvives) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreMap errors;
    CountMap n;
    for (int i = 0; i < 12; ++i) {
      errors[i] = rng.uniform(0.0, 10.0);
      n[i] = 1 + rng.uniform_index(40);
    }
    const auto a = anomaly_scores(errors);
    for (auto rule : {ThresholdRule::mean(), ThresholdRule::median()}) {
      const auto r = threshold_credit_scores(a, n, rule);
      double sum = 0.0;
      bool survivor = false;
      for (const auto& [id, v] : r.alpha) {
        sum += v;
        survivor = survivor || !r.flagged.at(id);
      }
      EXPECT_TRUE(survivor);
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(PermutationTest, RelabelingPermutesScores) {
  Rng rng(4);
  ScoreMap errors;
  CountMap n;
  for (int i = 0; i < 9; ++i) {
    errors[i] = rng.uniform(0.0, 5.0);
    n[i] = 1 + rng.uniform_index(20);
  }
  // Relabel i -> 100 - 7 i, which reverses the id order.
  ScoreMap errors2;
  CountMap n2;
  for (int i = 0; i < 9; ++i) {
    errors2[100 - 7 * i] = errors[i];
    n2[100 - 7 * i] = n[i];
  }
  const auto a = anomaly_scores(errors);
  const auto a2 = anomaly_scores(errors2);
  const auto c = credit_scores(a, n, 2.0);
  const auto c2 = credit_scores(a2, n2, 2.0);
  const auto t = threshold_credit_scores(a, n, ThresholdRule::mean());
  const auto t2 = threshold_credit_scores(a2, n2, ThresholdRule::mean());
  for (int i = 0; i < 9; ++i) {
    EXPECT_EQ(a.at(i), a2.at(100 - 7 * i));
    EXPECT_NEAR(c.at(i), c2.at(100 - 7 * i), 1e-15);
    EXPECT_EQ(t.flagged.at(i), t2.flagged.at(100 - 7 * i));
  }
}

TEST(AutoencoderTest, LayersMirrorConfig) {
  const std::vector<std::size_t> hidden{64, 32, 32, 64};
  const auto layers = autoencoder_layers(100, hidden);
  ASSERT_EQ(layers.size(), 5u);
  EXPECT_EQ(layers.front().input_dim, 100u);
  EXPECT_EQ(layers.back().output_dim, 100u);
  EXPECT_EQ(layers.back().activation, Activation::kIdentity);
  EXPECT_EQ(layers[1].activation, Activation::kRelu);
  AutoencoderConfig cfg;
  EXPECT_TRUE(cfg.is_symmetric());
  cfg.hidden_sizes = {8, 4};
  EXPECT_FALSE(cfg.is_symmetric());
}

TEST(AutoencoderTest, HandBuiltOneTwoOne) {
  // h = relu((1, -1) * 1 + (0, 0.5)) = (1, 0); out = 2 * 1 + 3 * 0 + 0.1 = 2.1.
  Network net({{1, 2, Activation::kRelu}, {2, 1, Activation::kIdentity}},
              {1.0, -1.0, 0.0, 0.5, 2.0, 3.0, 0.1});
  const Autoencoder ae(net, 0);
  const std::vector<double> s{1.0};
  EXPECT_NEAR(reconstruction_error(ae, s), 1.21, 1e-12);
  Matrix x(1, 1);
  x << 1.0;
  const Matrix y = forward(net, x);
  EXPECT_EQ(reconstruction_error(ae, s), mse_loss(s, std::vector<double>{y(0, 0)}));
}

TEST(AutoencoderTest, IdentityReconstructionIsZero) {
  Network net({{2, 2, Activation::kIdentity}}, {1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
  EXPECT_EQ(reconstruction_error(Autoencoder(net, 0), std::vector<double>{3.0, -4.0}), 0.0);
}

TEST(AutoencoderTest, ConvergesOnSinglePointCluster) {
  Rng rng(15);
  const auto v = testing::random_vector(rng, 8);
  const std::vector<SurrogateVector> data(16, v);
  AutoencoderConfig cfg;
  cfg.hidden_sizes = {16, 8, 16};
  cfg.dropout_rate = 0.0;
  cfg.batch_size = 16;
  cfg.epochs = 1500;
  cfg.learning_rate = 0.05;
  cfg.seed = 3;
  const auto ae = train_autoencoder(data, cfg);
  EXPECT_LT(reconstruction_error(ae, v), 0.01 * mse_loss(v, std::vector<double>(8, 0.0)));
}

TEST(AutoencoderTest, TrainingReducesError) {
  Rng rng(16);
  std::vector<SurrogateVector> data;
  for (int i = 0; i < 40; ++i) data.push_back(testing::random_vector(rng, 6));
  AutoencoderConfig cfg;
  cfg.hidden_sizes = {8, 4, 8};
  cfg.epochs = 100;
  cfg.seed = 5;
  const auto trained = train_autoencoder(data, cfg);
  const Autoencoder initial(
      Network::initialize(autoencoder_layers(6, cfg.hidden_sizes), split_seed(cfg.seed, {0})),
      0);
  double before = 0.0, after = 0.0;
  for (const auto& s : data) {
    before += reconstruction_error(initial, s);
    after += reconstruction_error(trained, s);
  }
  EXPECT_LT(after, before);
}

TEST(AutoencoderTest, ZeroDataKeepsZeroFixedPoint) {
  const std::vector<SurrogateVector> zeros(5, SurrogateVector(6, 0.0));
  AutoencoderConfig cfg;
  cfg.hidden_sizes = {4, 2, 4};
  cfg.epochs = 20;
  const auto ae = train_autoencoder(zeros, cfg);
  EXPECT_EQ(reconstruction_error(ae, zeros.front()), 0.0);
}

TEST(AutoencoderTest, DeterministicPerSeed) {
  Rng rng(17);
  std::vector<SurrogateVector> data;
  for (int i = 0; i < 10; ++i) data.push_back(testing::random_vector(rng, 5));
  AutoencoderConfig cfg;
  cfg.hidden_sizes = {6, 3, 6};
  cfg.epochs = 30;
  cfg.seed = 8;
  EXPECT_EQ(train_autoencoder(data, cfg).network().params(),
            train_autoencoder(data, cfg).network().params());
}

TEST(AutoencoderTest, NeedsTwoSurrogates) {
  const std::vector<SurrogateVector> one(1, SurrogateVector(3, 1.0));
  EXPECT_THROW(train_autoencoder(one, AutoencoderConfig{}), InputError);
}

TEST(AutoencoderTest, NonFiniteInputScoresInfinite) {
  Network net({{2, 2, Activation::kIdentity}}, {1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(reconstruction_error(Autoencoder(net, 0), std::vector<double>{nan, 0.0}), kInf);
}

TEST(DetectorTest, SeparatesSignFlippedUpdates) {
  // Honest updates cluster around a fixed vector; attackers send its negation.
  Rng rng(21);
  const std::size_t dim = 24;
  std::vector<LayerSpec> layers{{4, 4, Activation::kRelu}, {4, 2, Activation::kSoftmax}};
  const std::size_t n_params = 4 * 4 + 4 + 4 * 2 + 2;
  ASSERT_EQ(dim + 6, n_params);
  auto spec = build_surrogate_spec(layers, SurrogateMode::kRandomIndices, dim, 0, 2);
  const auto center = testing::random_vector(rng, n_params);
  auto honest = [&] {
    auto w = center;
    for (auto& x : w) x += 0.05 * rng.normal();
    return w;
  };
  DetectorConfig cfg;
  cfg.autoencoder.hidden_sizes = {16, 8, 16};
  cfg.autoencoder.epochs = 100;
  Detector det(spec, cfg);
  for (int i = 0; i < 60; ++i) det.observe(honest());
  det.fit();
  ASSERT_TRUE(det.trained());

  std::map<ClientId, WeightVector> updates;
  CountMap counts;
  for (int id = 0; id < 10; ++id) {
    auto w = honest();
    if (id % 3 == 0) {
      for (auto& x : w) x = -x;
    }
    updates[id] = w;
    counts[id] = 10;
  }
  const auto report = det.score(updates, counts, WeightingMode::kThresholding);
  for (const auto& c : report.clients) EXPECT_EQ(c.flagged, c.client_id % 3 == 0);
  double sum = 0.0;
  for (const auto& [id, a] : report.credits()) sum += a;
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

}  // namespace
}  // namespace fedwatch
