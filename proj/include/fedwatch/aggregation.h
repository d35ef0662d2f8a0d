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

// Aggregation rules over client weight updates.
//
// Every rule first orders updates by client id, so results do not depend
// on the order updates arrived in, bit for bit.

#ifndef FEDWATCH_AGGREGATION_H_
#define FEDWATCH_AGGREGATION_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedwatch/detector.h"
#include "fedwatch/nn.h"

namespace fedwatch {

struct ClientUpdate {
  ClientId client_id = 0;
  std::size_t sample_count = 0;
  WeightVector weights;
};

enum class AggregationMethod { kFedAvg, kCreditScore, kThresholding, kKrum, kGeoMed, kTrimmedMean };

std::string_view to_string(AggregationMethod method);
AggregationMethod parse_aggregation_method(std::string_view name);
bool uses_detector(AggregationMethod method);

struct BaselineParams {
  // Assumed attacker count for Krum; unset means ceil(0.3 K).
  std::optional<std::size_t> krum_f;
  double trim_fraction = 0.3;
  double geomed_tol = 1e-6;
  std::size_t geomed_max_iters = 100;

  std::size_t resolved_krum_f(std::size_t clients) const;
};

// sum_k (n_k / n) w_k.
WeightVector fedavg_aggregate(std::span<const ClientUpdate> updates);

// sum_k alpha_k w_k. `alpha` must have exactly the updates' client ids and
// sum to at most 1 + 1e-9. Zero-weight updates are skipped entirely, so a
// non-finite update with weight 0 cannot leak into the result.
WeightVector weighted_aggregate(std::span<const ClientUpdate> updates, const ScoreMap& alpha);

// Krum score of each update (in ascending client-id order): the sum of
// squared distances to its K - f - 2 nearest other updates.
std::vector<double> krum_scores(std::span<const ClientUpdate> updates, std::size_t f);

// The update with the lowest Krum score, ties to the lowest client id.
// Requires K >= f + 3.
WeightVector krum_select(std::span<const ClientUpdate> updates, std::size_t f);

// Sum of Euclidean distances from `point` to each update.
double geomed_objective(std::span<const ClientUpdate> updates, std::span<const double> point);

// Weiszfeld iteration from the coordinate-wise median. Stops when a step
// is shorter than `tol` or after `max_iters` steps and returns the lowest
// objective point among the iterates and the coordinate-wise mean.
WeightVector geomed_aggregate(std::span<const ClientUpdate> updates, double tol,
                              std::size_t max_iters);

// Per coordinate: drop the floor(beta K) smallest and largest values and
// average the rest. Requires 2 floor(beta K) < K.
WeightVector trimmed_mean_aggregate(std::span<const ClientUpdate> updates, double beta);

}  // namespace fedwatch

#endif  // FEDWATCH_AGGREGATION_H_
