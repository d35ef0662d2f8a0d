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
#include <limits>
#include <string>

#include "fedwatch/errors.h"

namespace fedwatch {

std::string_view to_string(AggregationMethod method) {
  switch (method) {
    case AggregationMethod::kFedAvg:
      return "fedavg";
    case AggregationMethod::kCreditScore:
      return "credit_score";
    case AggregationMethod::kThresholding:
      return "thresholding";
    case AggregationMethod::kKrum:
      return "krum";
    case AggregationMethod::kGeoMed:
      return "geomed";
    case AggregationMethod::kTrimmedMean:
      return "trimmed_mean";
  }
  return "unknown";
}

AggregationMethod parse_aggregation_method(std::string_view name) {
  for (auto m : {AggregationMethod::kFedAvg, AggregationMethod::kCreditScore,
                 AggregationMethod::kThresholding, AggregationMethod::kKrum,
                 AggregationMethod::kGeoMed, AggregationMethod::kTrimmedMean}) {
    if (to_string(m) == name) return m;
  }
  throw InputError("unknown aggregation method '" + std::string(name) + "'");
}

bool uses_detector(AggregationMethod method) {
  return method == AggregationMethod::kCreditScore ||
         method == AggregationMethod::kThresholding;
}

std::size_t BaselineParams::resolved_krum_f(std::size_t clients) const {
  if (krum_f) return *krum_f;
  return static_cast<std::size_t>(std::ceil(0.3 * static_cast<double>(clients) - 1e-9));
}

namespace {

// Updates sorted by client id, validated for equal length.
std::vector<const ClientUpdate*> canonical(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw InputError("no updates to aggregate");
  std::vector<const ClientUpdate*> order;
  order.reserve(updates.size());
  for (const auto& u : updates) order.push_back(&u);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return a->client_id < b->client_id;
  });
  const std::size_t dim = order.front()->weights.size();
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i]->weights.size() != dim) throw ShapeError("updates differ in length");
    if (i > 0 && order[i]->client_id == order[i - 1]->client_id) {
      throw InputError("duplicate client id " + std::to_string(order[i]->client_id));
    }
  }
  return order;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double objective_in_order(std::span<const ClientUpdate* const> order,
                          std::span<const double> point) {
  double total = 0.0;
  for (const auto* u : order) total += std::sqrt(squared_distance(u->weights, point));
  return total;
}

}  // namespace

WeightVector fedavg_aggregate(std::span<const ClientUpdate> updates) {
  const auto order = canonical(updates);
  double n = 0.0;
  for (const auto* u : order) {
    if (u->sample_count == 0) throw InputError("sample count must be positive");
    n += static_cast<double>(u->sample_count);
  }
  WeightVector out(order.front()->weights.size(), 0.0);
  for (const auto* u : order) {
    const double coef = static_cast<double>(u->sample_count) / n;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coef * u->weights[i];
  }
  return out;
}

WeightVector weighted_aggregate(std::span<const ClientUpdate> updates, const ScoreMap& alpha) {
  const auto order = canonical(updates);
  if (alpha.size() != order.size()) throw InputError("alpha keys do not match updates");
  double total = 0.0;
  for (const auto* u : order) {
    auto it = alpha.find(u->client_id);
    if (it == alpha.end()) {
      throw InputError("no alpha for client " + std::to_string(u->client_id));
    }
    if (!(it->second >= 0.0)) throw InputError("alpha must be non-negative");
    total += it->second;
  }
  if (total > 1.0 + 1e-9) throw InputError("alpha sums to more than 1");
  WeightVector out(order.front()->weights.size(), 0.0);
  for (const auto* u : order) {
    const double coef = alpha.at(u->client_id);
    if (coef == 0.0) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coef * u->weights[i];
  }
  return out;
}

std::vector<double> krum_scores(std::span<const ClientUpdate> updates, std::size_t f) {
  const auto order = canonical(updates);
  const std::size_t k = order.size();
  if (k < f + 3) {
    throw InputError("krum needs K >= f + 3 (K=" + std::to_string(k) +
                     ", f=" + std::to_string(f) + ")");
  }
  const std::size_t neighbours = k - f - 2;
  std::vector<std::vector<double>> dist(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      dist[i][j] = dist[j][i] = squared_distance(order[i]->weights, order[j]->weights);
    }
  }
  std::vector<double> scores(k, 0.0);
  std::vector<double> row;
  for (std::size_t i = 0; i < k; ++i) {
    row.clear();
    for (std::size_t j = 0; j < k; ++j) {
      if (j != i) row.push_back(dist[i][j]);
    }
    std::sort(row.begin(), row.end());
    for (std::size_t j = 0; j < neighbours; ++j) scores[i] += row[j];
  }
  return scores;
}

WeightVector krum_select(std::span<const ClientUpdate> updates, std::size_t f) {
  const auto order = canonical(updates);
  const auto scores = krum_scores(updates, f);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    // Strict comparison keeps the lowest client id on ties. NaN scores
    // never win.
    if (scores[i] < scores[best] || std::isnan(scores[best])) best = i;
  }
  return order[best]->weights;
}

double geomed_objective(std::span<const ClientUpdate> updates, std::span<const double> point) {
  const auto order = canonical(updates);
  if (order.front()->weights.size() != point.size()) {
    throw ShapeError("point dimension mismatch");
  }
  return objective_in_order(order, point);
}

WeightVector geomed_aggregate(std::span<const ClientUpdate> updates, double tol,
                              std::size_t max_iters) {
  if (!(tol > 0.0)) throw InputError("geomed tol must be positive");
  const auto order = canonical(updates);
  const std::size_t dim = order.front()->weights.size();
  // Distances below this are treated as this, which keeps Weiszfeld weights
  // finite when the iterate lands on a data point.
  constexpr double kSingularity = 1e-12;

  WeightVector mean(dim, 0.0);
  for (const auto* u : order) {
    for (std::size_t i = 0; i < dim; ++i) mean[i] += u->weights[i];
  }
  for (auto& v : mean) v /= static_cast<double>(order.size());

  // Iteration starts at the coordinate-wise median; the mean stays a
  // candidate so the result never scores worse than it.
  WeightVector x(dim);
  std::vector<double> column(order.size());
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t k = 0; k < order.size(); ++k) column[k] = order[k]->weights[i];
    std::sort(column.begin(), column.end());
    const std::size_t mid = column.size() / 2;
    x[i] = column.size() % 2 == 1 ? column[mid] : 0.5 * (column[mid - 1] + column[mid]);
  }

  WeightVector best = mean;
  double best_objective = objective_in_order(order, mean);
  if (const double start = objective_in_order(order, x); start < best_objective) {
    best_objective = start;
    best = x;
  }
  WeightVector next(dim);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    double weight_sum = 0.0;
    for (const auto* u : order) {
      const double d = std::max(std::sqrt(squared_distance(u->weights, x)), kSingularity);
      const double w = 1.0 / d;
      weight_sum += w;
      for (std::size_t i = 0; i < dim; ++i) next[i] += w * u->weights[i];
    }
    for (auto& v : next) v /= weight_sum;
    const double step = std::sqrt(squared_distance(next, x));
    x.swap(next);
    const double objective = objective_in_order(order, x);
    if (objective < best_objective) {
      best_objective = objective;
      best = x;
    }
    if (!(step >= tol)) break;
  }
  return best;
}

WeightVector trimmed_mean_aggregate(std::span<const ClientUpdate> updates, double beta) {
  if (!(beta >= 0.0 && beta < 0.5)) throw InputError("trim fraction must be in [0, 0.5)");
  const auto order = canonical(updates);
  const std::size_t k = order.size();
  const auto trim = static_cast<std::size_t>(std::floor(beta * static_cast<double>(k) + 1e-9));
  if (2 * trim >= k) {
    throw InputError("trim fraction removes every update (K=" + std::to_string(k) + ")");
  }
  const std::size_t dim = order.front()->weights.size();
  WeightVector out(dim);
  std::vector<double> column(k);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < k; ++j) column[j] = order[j]->weights[i];
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (std::size_t j = trim; j < k - trim; ++j) sum += column[j];
    out[i] = sum / static_cast<double>(k - 2 * trim);
  }
  return out;
}

}  // namespace fedwatch
