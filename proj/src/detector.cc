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

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedwatch/errors.h"
#include "fedwatch/rng.h"

namespace fedwatch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void AutoencoderConfig::validate() const {
  if (hidden_sizes.empty()) throw InputError("autoencoder needs at least one hidden layer");
  for (auto h : hidden_sizes) {
    if (h == 0) throw InputError("autoencoder hidden sizes must be positive");
  }
  if (batch_size == 0) throw InputError("autoencoder batch_size must be positive");
  if (epochs == 0) throw InputError("autoencoder epochs must be positive");
  if (!(learning_rate > 0.0)) throw InputError("autoencoder learning_rate must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InputError("autoencoder dropout_rate must be in [0, 1)");
  }
}

bool AutoencoderConfig::is_symmetric() const {
  return std::equal(hidden_sizes.begin(), hidden_sizes.end(), hidden_sizes.rbegin());
}

Autoencoder::Autoencoder(Network net, std::size_t training_set_size)
    : net_(std::move(net)), training_set_size_(training_set_size) {
  if (net_.input_dim() != net_.output_dim()) {
    throw ShapeError("autoencoder input and output dimensions differ");
  }
}

std::vector<LayerSpec> autoencoder_layers(std::size_t dim,
                                          std::span<const std::size_t> hidden_sizes) {
  std::vector<LayerSpec> layers;
  std::size_t prev = dim;
  for (auto h : hidden_sizes) {
    layers.push_back({prev, h, Activation::kRelu});
    prev = h;
  }
  layers.push_back({prev, dim, Activation::kIdentity});
  return layers;
}

Autoencoder train_autoencoder(std::span<const SurrogateVector> surrogates,
                              const AutoencoderConfig& cfg) {
  cfg.validate();
  if (surrogates.size() < 2) {
    throw InputError("autoencoder needs at least 2 training surrogates, got " +
                     std::to_string(surrogates.size()));
  }
  const std::size_t dim = surrogates.front().size();
  if (dim == 0) throw InputError("surrogates are empty");
  Matrix data(static_cast<Eigen::Index>(surrogates.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < surrogates.size(); ++i) {
    if (surrogates[i].size() != dim) throw InputError("surrogates differ in length");
    for (std::size_t d = 0; d < dim; ++d) {
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = surrogates[i][d];
    }
  }
  Network net = Network::initialize(autoencoder_layers(dim, cfg.hidden_sizes),
                                    split_seed(cfg.seed, {0}));
  TrainConfig train_cfg;
  train_cfg.learning_rate = cfg.learning_rate;
  train_cfg.batch_size = cfg.batch_size;
  train_cfg.epochs = cfg.epochs;
  train_cfg.dropout_rate = cfg.dropout_rate;
  train_cfg.rng_seed = split_seed(cfg.seed, {1});
  return Autoencoder(train_reconstruction(net, data, train_cfg), surrogates.size());
}

double reconstruction_error(const Autoencoder& ae, std::span<const double> surrogate) {
  if (surrogate.size() != ae.dim()) {
    throw ShapeError("surrogate length " + std::to_string(surrogate.size()) +
                     " does not match autoencoder dimension " + std::to_string(ae.dim()));
  }
  Matrix input(1, static_cast<Eigen::Index>(surrogate.size()));
  std::copy(surrogate.begin(), surrogate.end(), input.data());
  const Matrix output = forward(ae.network(), input);
  const double err = mse_loss(surrogate, std::span<const double>(output.data(), surrogate.size()));
  return std::isfinite(err) ? err : kInf;
}

ScoreMap anomaly_scores(const ScoreMap& errors) {
  if (errors.empty()) throw InputError("anomaly_scores: no clients");
  double sigma = kInf;
  for (const auto& [id, err] : errors) {
    if (!(err >= 0.0)) {
      throw InputError("anomaly_scores: client " + std::to_string(id) +
                       " has a negative or NaN error");
    }
    sigma = std::min(sigma, err);
  }
  ScoreMap scores;
  for (const auto& [id, err] : errors) {
    // Every error infinite: nobody can be ranked, all score the floor.
    scores[id] = std::isinf(sigma) ? 1.0 : (1.0 + err) / (1.0 + sigma);
  }
  // The minimiser's ratio is exactly 1 in IEEE arithmetic; keep it explicit.
  for (const auto& [id, err] : errors) {
    if (err == sigma) scores[id] = 1.0;
  }
  return scores;
}

namespace {

void check_keys(const ScoreMap& anomaly, const CountMap& counts) {
  if (anomaly.empty()) throw InputError("no clients to score");
  if (anomaly.size() != counts.size()) throw InputError("anomaly and count keys differ");
  auto c = counts.begin();
  for (auto a = anomaly.begin(); a != anomaly.end(); ++a, ++c) {
    if (a->first != c->first) throw InputError("anomaly and count keys differ");
    if (!(a->second >= 1.0)) {
      throw InputError("anomaly score below 1 for client " + std::to_string(a->first));
    }
    if (c->second == 0) {
      throw InputError("sample count is zero for client " + std::to_string(c->first));
    }
  }
}

}  // namespace

ScoreMap credit_scores(const ScoreMap& anomaly, const CountMap& counts, double exponent) {
  check_keys(anomaly, counts);
  if (!(exponent >= 0.0)) throw InputError("credit exponent L must be non-negative");
  ScoreMap raw;
  double total = 0.0;
  for (const auto& [id, a] : anomaly) {
    const double w = static_cast<double>(counts.at(id)) * std::pow(a, -exponent);
    raw[id] = w;
    total += w;
  }
  for (auto& [id, w] : raw) w /= total;
  return raw;
}

ThresholdRule ThresholdRule::fixed(double value) {
  if (!(value >= 1.0)) {
    throw InputError("explicit threshold must be at least 1; smaller values flag every client");
  }
  return {Kind::kExplicit, value};
}

std::string_view to_string(ThresholdRule::Kind kind) {
  switch (kind) {
    case ThresholdRule::Kind::kMean:
      return "mean";
    case ThresholdRule::Kind::kMedian:
      return "median";
    case ThresholdRule::Kind::kExplicit:
      return "explicit";
  }
  return "unknown";
}

double resolve_threshold(const ThresholdRule& rule, const ScoreMap& anomaly) {
  if (rule.kind == ThresholdRule::Kind::kExplicit) {
    if (!(rule.value >= 1.0)) throw InputError("explicit threshold must be at least 1");
    return rule.value;
  }
  std::vector<double> finite;
  for (const auto& [id, a] : anomaly) {
    if (std::isfinite(a)) finite.push_back(a);
  }
  if (finite.empty()) return 1.0;
  if (rule.kind == ThresholdRule::Kind::kMean) {
    double sum = 0.0;
    for (double a : finite) sum += a;
    return sum / static_cast<double>(finite.size());
  }
  std::sort(finite.begin(), finite.end());
  const std::size_t mid = finite.size() / 2;
  return finite.size() % 2 == 1 ? finite[mid] : 0.5 * (finite[mid - 1] + finite[mid]);
}

ThresholdResult threshold_credit_scores(const ScoreMap& anomaly, const CountMap& counts,
                                        const ThresholdRule& rule, bool renormalize) {
  check_keys(anomaly, counts);
  ThresholdResult result;
  result.threshold = resolve_threshold(rule, anomaly);
  double total = 0.0;
  double surviving = 0.0;
  for (const auto& [id, a] : anomaly) {
    const bool flag = a > result.threshold;
    result.flagged[id] = flag;
    total += static_cast<double>(counts.at(id));
    if (!flag) surviving += static_cast<double>(counts.at(id));
  }
  const double denom = renormalize ? surviving : total;
  for (const auto& [id, flag] : result.flagged) {
    const double n = static_cast<double>(counts.at(id));
    result.alpha[id] = flag ? 0.0 : n / denom;
    if (!flag) result.unnormalized_alpha_sum += n / total;
  }
  return result;
}

ScoreMap AnomalyReport::credits() const {
  ScoreMap out;
  for (const auto& c : clients) out[c.client_id] = c.credit;
  return out;
}

std::vector<ClientId> AnomalyReport::flagged_clients() const {
  std::vector<ClientId> out;
  for (const auto& c : clients) {
    if (c.flagged) out.push_back(c.client_id);
  }
  return out;
}

Detector::Detector(SurrogateSpec spec, DetectorConfig cfg)
    : spec_(std::move(spec)), cfg_(std::move(cfg)), standardizer_(spec_.target_dim) {
  cfg_.autoencoder.validate();
  if (!(cfg_.exponent >= 0.0)) throw InputError("credit exponent L must be non-negative");
}

void Detector::observe(std::span<const double> weights) {
  buffer_.push_back(extract(spec_, weights));
}

void Detector::fit() {
  if (buffer_.size() < 2) {
    throw InputError("detector needs at least 2 buffered updates to train, has " +
                     std::to_string(buffer_.size()));
  }
  standardizer_ = cfg_.standardize ? Standardizer::fit(buffer_) : Standardizer(spec_.target_dim);
  std::vector<SurrogateVector> prepared;
  prepared.reserve(buffer_.size());
  for (const auto& s : buffer_) prepared.push_back(standardizer_.apply(s));
  autoencoder_ = train_autoencoder(prepared, cfg_.autoencoder);
  rounds_since_fit_ = 0;
}

SurrogateVector Detector::prepare(std::span<const double> weights) const {
  return standardizer_.apply(extract(spec_, weights));
}

AnomalyReport Detector::score(const std::map<ClientId, WeightVector>& updates,
                              const CountMap& counts, WeightingMode mode) const {
  if (!autoencoder_) throw InputError("detector has not been trained");
  ScoreMap errors;
  for (const auto& [id, w] : updates) {
    errors[id] = reconstruction_error(*autoencoder_, prepare(w));
  }
  const ScoreMap anomaly = anomaly_scores(errors);
  const ThresholdResult cut =
      threshold_credit_scores(anomaly, counts, cfg_.rule, !cfg_.paper_exact_thresholding);
  const ScoreMap credit = mode == WeightingMode::kCreditScore
                              ? credit_scores(anomaly, counts, cfg_.exponent)
                              : cut.alpha;

  AnomalyReport report;
  report.sigma = kInf;
  for (const auto& [id, err] : errors) report.sigma = std::min(report.sigma, err);
  report.threshold = cut.threshold;
  report.unnormalized_alpha_sum =
      mode == WeightingMode::kThresholding ? cut.unnormalized_alpha_sum : 1.0;
  for (const auto& [id, err] : errors) {
    report.clients.push_back(
        {id, err, anomaly.at(id), credit.at(id), cut.flagged.at(id)});
  }
  return report;
}

void Detector::after_round(const std::map<ClientId, WeightVector>& updates,
                           const AnomalyReport& report) {
  if (cfg_.retrain_every == 0) return;
  for (const auto& c : report.clients) {
    if (!c.flagged) observe(updates.at(c.client_id));
  }
  if (++rounds_since_fit_ >= cfg_.retrain_every) fit();
}

}  // namespace fedwatch
