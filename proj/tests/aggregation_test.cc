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


#include "fedwatch/aggregation.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fedwatch/errors.h"
#include "test_util.h"

namespace fedwatch {
namespace {

std::vector<ClientUpdate> points(const std::vector<std::vector<double>>& pts) {
  std::vector<ClientUpdate> out;
  for (std::size_t i = 0; i < pts.size(); ++i) out.push_back({static_cast<ClientId>(i), 1, pts[i]});
  return out;
}

std::vector<std::vector<double>> raw(const std::vector<ClientUpdate>& updates) {
  std::vector<std::vector<double>> out;
  for (const auto& u : updates) out.push_back(u.weights);
  return out;
}

TEST(MethodNameTest, RoundTrip) {
  for (auto m : {AggregationMethod::kFedAvg, AggregationMethod::kCreditScore,
                 AggregationMethod::kThresholding, AggregationMethod::kKrum,
                 AggregationMethod::kGeoMed, AggregationMethod::kTrimmedMean}) {
    EXPECT_EQ(parse_aggregation_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_aggregation_method("median"), InputError);
  EXPECT_TRUE(uses_detector(AggregationMethod::kThresholding));
  EXPECT_FALSE(uses_detector(AggregationMethod::kKrum));
}

TEST(FedAvgTest, WeightedBySampleCount) {
  const std::vector<ClientUpdate> u{{0, 1, {0.0, 4.0}}, {1, 3, {4.0, 0.0}}};
  EXPECT_EQ(fedavg_aggregate(u), (std::vector<double>{3.0, 1.0}));
}

TEST(FedAvgTest, SingleUpdateIsItselfAndEmptyCountRejected) {
  EXPECT_EQ(fedavg_aggregate(std::vector<ClientUpdate>{{3, 7, {1.5, -2.5}}}),
            (std::vector<double>{1.5, -2.5}));
  const std::vector<ClientUpdate> u{{0, 0, {9.0, 9.0}}, {1, 7, {1.5, -2.5}}};
  EXPECT_THROW(fedavg_aggregate(u), InputError);
}

TEST(FedAvgTest, ArrivalOrderIrrelevantBitForBit) {
  Rng rng(31);
  auto u = testing::random_updates(rng, 9, 40);
  const auto a = fedavg_aggregate(u);
  std::reverse(u.begin(), u.end());
  EXPECT_EQ(fedavg_aggregate(u), a);
}

TEST(FedAvgTest, RejectsMismatchedShapes) {
  const std::vector<ClientUpdate> u{{0, 1, {1.0}}, {1, 1, {1.0, 2.0}}};
  EXPECT_THROW(fedavg_aggregate(u), ShapeError);
}

TEST(WeightedTest, OneHotReturnsThatUpdate) {
  Rng rng(2);
  const auto u = testing::random_updates(rng, 5, 12);
  const ScoreMap alpha{{0, 0.0}, {1, 0.0}, {2, 1.0}, {3, 0.0}, {4, 0.0}};
  EXPECT_EQ(weighted_aggregate(u, alpha), u[2].weights);
}

TEST(WeightedTest, SampleShareWeightsMatchFedAvg) {
  Rng rng(8);
  const auto u = testing::random_updates(rng, 6, 20);
  double n = 0.0;
  for (const auto& x : u) n += static_cast<double>(x.sample_count);
  ScoreMap alpha;
  for (const auto& x : u) alpha[x.client_id] = static_cast<double>(x.sample_count) / n;
  const auto a = weighted_aggregate(u, alpha);
  const auto b = fedavg_aggregate(u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(WeightedTest, ZeroWeightSkipsNonFinite) {
  const std::vector<ClientUpdate> u{{0, 1, {1.0, 2.0}},
                                    {1, 1, {INFINITY, NAN}}};
  EXPECT_EQ(weighted_aggregate(u, {{0, 1.0}, {1, 0.0}}), (std::vector<double>{1.0, 2.0}));
}

TEST(WeightedTest, KeyMismatchAndExcessMassRejected) {
  const std::vector<ClientUpdate> u{{0, 1, {1.0}}, {1, 1, {2.0}}};
  EXPECT_THROW(weighted_aggregate(u, {{0, 1.0}}), InputError);
  EXPECT_THROW(weighted_aggregate(u, {{0, 0.7}, {1, 0.7}}), InputError);
}

TEST(KrumTest, FarOutlierNeverChosen) {
  const auto u = points({{0.0, 0.0}, {0.1, 0.0}, {0.0, 0.1}, {0.1, 0.1}, {100.0, 100.0}});
  const auto chosen = krum_select(u, 1);
  EXPECT_LT(testing::l2(chosen), 1.0);
}

TEST(KrumTest, ScoresMatchBruteForce) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 4 + rng.uniform_index(5);
    const std::size_t f = rng.uniform_index(k - 2);
    const auto u = testing::random_updates(rng, k, 1 + rng.uniform_index(4));
    const auto got = krum_scores(u, f);
    const auto want = testing::brute_krum_scores(raw(u), f);
    for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(got[i], want[i], 1e-9 * (1 + want[i]));
  }
}

TEST(KrumTest, RequiresEnoughClients) {
  const auto u = points({{0.0}, {1.0}, {2.0}});
  EXPECT_THROW(krum_select(u, 1), InputError);
  EXPECT_NO_THROW(krum_select(u, 0));
}

TEST(KrumTest, DefaultF) {
  BaselineParams p;
  EXPECT_EQ(p.resolved_krum_f(20), 6u);
  EXPECT_EQ(p.resolved_krum_f(10), 3u);
  p.krum_f = 2;
  EXPECT_EQ(p.resolved_krum_f(20), 2u);
}

TEST(GeoMedTest, OneDimensionalIsTheMedian) {
  const auto g = geomed_aggregate(points({{0.0}, {1.0}, {10.0}}), 1e-9, 200);
  EXPECT_NEAR(g[0], 1.0, 1e-6);
}

TEST(GeoMedTest, NoWorseThanTheMean) {
  Rng rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    auto u = testing::random_updates(rng, 7, 5);
    u[0].weights[0] += 50.0;
    std::vector<double> mean(5, 0.0);
    for (const auto& x : u) {
      for (std::size_t i = 0; i < 5; ++i) mean[i] += x.weights[i] / 7.0;
    }
    const auto g = geomed_aggregate(u, 1e-8, 100);
    EXPECT_LE(geomed_objective(u, g), geomed_objective(u, mean) + 1e-12);
  }
}

TEST(GeoMedTest, SingleUpdateIsItself) {
  const auto u = points({{3.0, -1.0}});
  EXPECT_EQ(geomed_aggregate(u, 1e-6, 10), (std::vector<double>{3.0, -1.0}));
}

TEST(TrimmedMeanTest, DropsExtremesPerCoordinate) {
  const auto u = points({{1.0, 50.0}, {2.0, 1.0}, {3.0, 2.0}, {100.0, 3.0}, {4.0, -40.0}});
  // floor(0.2 * 5) = 1 trimmed from each end.
  EXPECT_EQ(trimmed_mean_aggregate(u, 0.2), (std::vector<double>{3.0, 2.0}));
}

TEST(TrimmedMeanTest, ZeroBetaIsPlainMean) {
  const auto u = points({{1.0}, {2.0}, {6.0}});
  EXPECT_EQ(trimmed_mean_aggregate(u, 0.0), (std::vector<double>{3.0}));
}

TEST(TrimmedMeanTest, TooMuchTrimRejected) {
  const auto u = points({{1.0}, {2.0}});
  EXPECT_THROW(trimmed_mean_aggregate(u, 0.5), InputError);
}

TEST(TrimmedMeanTest, MatchesBruteForce) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 3 + rng.uniform_index(10);
    const auto u = testing::random_updates(rng, k, 6);
    const double beta = 0.3;
    const auto got = trimmed_mean_aggregate(u, beta);
    const auto want = testing::brute_trimmed_mean(raw(u), static_cast<std::size_t>(beta * k));
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(RobustTest, PermutationInvariance) {
  Rng rng(40);
  auto u = testing::random_updates(rng, 10, 8);
  const auto krum = krum_select(u, 3);
  const auto geo = geomed_aggregate(u, 1e-8, 100);
  const auto trim = trimmed_mean_aggregate(u, 0.2);
  std::reverse(u.begin(), u.end());
  std::swap(u[2], u[7]);
  EXPECT_EQ(krum_select(u, 3), krum);
  EXPECT_EQ(geomed_aggregate(u, 1e-8, 100), geo);
  EXPECT_EQ(trimmed_mean_aggregate(u, 0.2), trim);
}

TEST(RobustTest, TranslationEquivariance) {
  Rng rng(41);
  const auto u = testing::random_updates(rng, 10, 4);
  const std::vector<double> shift{1.0, -2.0, 0.5, 3.0};
  auto moved = u;
  for (auto& x : moved) {
    for (std::size_t i = 0; i < 4; ++i) x.weights[i] += shift[i];
  }
  const auto a = krum_select(u, 2);
  const auto b = krum_select(moved, 2);
  const auto ta = trimmed_mean_aggregate(u, 0.2);
  const auto tb = trimmed_mean_aggregate(moved, 0.2);
  const auto ga = geomed_aggregate(u, 1e-10, 500);
  const auto gb = geomed_aggregate(moved, 1e-10, 500);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(b[i], a[i] + shift[i], 1e-12);
    EXPECT_NEAR(tb[i], ta[i] + shift[i], 1e-12);
    EXPECT_NEAR(gb[i], ga[i] + shift[i], 1e-5);
  }
}

TEST(RobustTest, OneHugeUpdateDoesNotDominate) {
  Rng rng(42);
  auto u = testing::random_updates(rng, 10, 6);
  for (auto& x : u[4].weights) x = 1e6;
  for (const auto& agg : {krum_select(u, 3), geomed_aggregate(u, 1e-8, 100),
                          trimmed_mean_aggregate(u, 0.2)}) {
    for (double v : agg) EXPECT_LT(std::abs(v), 10.0);
  }
  for (double v : fedavg_aggregate(u)) EXPECT_GT(std::abs(v), 1e3);
}

TEST(RobustTest, StayInsideCoordinateRange) {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const auto u = testing::random_updates(rng, 8, 5);
    for (const auto& agg : {krum_select(u, 2), geomed_aggregate(u, 1e-8, 100),
                            trimmed_mean_aggregate(u, 0.25)}) {
      for (std::size_t i = 0; i < 5; ++i) {
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& x : u) {
          lo = std::min(lo, x.weights[i]);
          hi = std::max(hi, x.weights[i]);
        }
        EXPECT_GE(agg[i], lo - 1e-12);
        EXPECT_LE(agg[i], hi + 1e-12);
      }
    }
  }
}

}  // namespace
}  // namespace fedwatch
