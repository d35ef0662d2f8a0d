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

// Server-side anomaly detection over client weight updates.
//
// An autoencoder is fitted to surrogates of updates gathered before
// detection starts. Each round, a client's reconstruction error err_k is
// turned into an anomaly score
//
//   A_k = (1 + err_k) / (1 + sigma),   sigma = min_j err_j,
//
// so the best-reconstructed client always scores exactly 1. Scores feed
// either soft credit weights
//
//   alpha_k = n_k A_k^-L / sum_j n_j A_j^-L
//
// or a hard cut that zeroes every client whose score is strictly above a
// threshold (mean or median of the round's scores, or a fixed value).

#ifndef FEDWATCH_DETECTOR_H_
#define FEDWATCH_DETECTOR_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedwatch/nn.h"
#include "fedwatch/surrogate.h"

namespace fedwatch {

using ClientId = int;
using ScoreMap = std::map<ClientId, double>;
using CountMap = std::map<ClientId, std::size_t>;

struct AutoencoderConfig {
  std::vector<std::size_t> hidden_sizes{64, 32, 32, 64};
  std::size_t batch_size = 32;
  double dropout_rate = 0.2;
  std::size_t epochs = 200;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
  // True when hidden_sizes reads the same in both directions.
  bool is_symmetric() const;
};

class Autoencoder {
 public:
  Autoencoder(Network net, std::size_t training_set_size);

  const Network& network() const { return net_; }
  std::size_t dim() const { return net_.input_dim(); }
  std::size_t training_set_size() const { return training_set_size_; }

 private:
  Network net_;
  std::size_t training_set_size_;
};

// dim -> hidden (relu) ... -> dim (identity).
std::vector<LayerSpec> autoencoder_layers(std::size_t dim,
                                          std::span<const std::size_t> hidden_sizes);

// Throws InputError if fewer than two surrogates are given or their
// lengths differ.
Autoencoder train_autoencoder(std::span<const SurrogateVector> surrogates,
                              const AutoencoderConfig& cfg);

// ||s - ae(s)||^2 with dropout off. Non-finite results are reported as
// +infinity so a corrupted update always ranks as the most anomalous.
double reconstruction_error(const Autoencoder& ae, std::span<const double> surrogate);

ScoreMap anomaly_scores(const ScoreMap& errors);

ScoreMap credit_scores(const ScoreMap& anomaly, const CountMap& counts, double exponent);

struct ThresholdRule {
  enum class Kind { kMean, kMedian, kExplicit };
  Kind kind = Kind::kMean;
  double value = 0.0;  // kExplicit only

  static ThresholdRule mean() { return {Kind::kMean, 0.0}; }
  static ThresholdRule median() { return {Kind::kMedian, 0.0}; }
  // Throws InputError for values below 1, which would flag every client.
  static ThresholdRule fixed(double value);
};

std::string_view to_string(ThresholdRule::Kind kind);

// Mean or median over the finite scores (or the fixed value). Infinite
// scores are excluded from the statistic and always exceed it.
double resolve_threshold(const ThresholdRule& rule, const ScoreMap& anomaly);

struct ThresholdResult {
  ScoreMap alpha;
  std::map<ClientId, bool> flagged;
  double threshold = 0.0;
  // Sum of n_k / n over surviving clients, n taken over all clients.
  double unnormalized_alpha_sum = 0.0;
};

// Flags clients with A_k strictly above the threshold and zeroes their
// weight. Survivors get n_k / (sum of surviving n) when `renormalize` is
// set, or n_k / (sum of all n) otherwise.
ThresholdResult threshold_credit_scores(const ScoreMap& anomaly, const CountMap& counts,
                                        const ThresholdRule& rule, bool renormalize = true);

struct ClientAnomaly {
  ClientId client_id = 0;
  double error = 0.0;
  double anomaly = 1.0;
  double credit = 0.0;
  bool flagged = false;
};

struct AnomalyReport {
  std::vector<ClientAnomaly> clients;  // ascending client_id
  double sigma = 0.0;
  double threshold = 0.0;
  double unnormalized_alpha_sum = 1.0;

  ScoreMap credits() const;
  std::vector<ClientId> flagged_clients() const;
};

enum class WeightingMode { kCreditScore, kThresholding };

struct DetectorConfig {
  AutoencoderConfig autoencoder;
  double exponent = 2.0;  // L
  ThresholdRule rule = ThresholdRule::mean();
  bool paper_exact_thresholding = false;
  bool standardize = true;
  // Refit on the accumulated buffer every this many detection rounds; 0
  // trains once.
  std::size_t retrain_every = 0;
};

// Stateful server-side detector. Owns the surrogate spec, the fitted
// standardizer and autoencoder, and the buffer of accepted surrogates.
class Detector {
 public:
  Detector(SurrogateSpec spec, DetectorConfig cfg);

  const SurrogateSpec& spec() const { return spec_; }
  bool trained() const { return autoencoder_.has_value(); }
  std::size_t buffer_size() const { return buffer_.size(); }
  const Autoencoder& autoencoder() const { return *autoencoder_; }

  // Adds the surrogate of an update to the training buffer.
  void observe(std::span<const double> weights);

  // Fits standardizer and autoencoder on the buffer.
  void fit();

  // Scores the round's updates and computes aggregation weights.
  // `updates` and `counts` are keyed by client id. Requires trained().
  AnomalyReport score(const std::map<ClientId, WeightVector>& updates,
                      const CountMap& counts, WeightingMode mode) const;

  // Called after a detection round: buffers unflagged updates and refits
  // when the retraining cadence is due.
  void after_round(const std::map<ClientId, WeightVector>& updates,
                   const AnomalyReport& report);

 private:
  SurrogateVector prepare(std::span<const double> weights) const;

  SurrogateSpec spec_;
  DetectorConfig cfg_;
  std::vector<SurrogateVector> buffer_;
  Standardizer standardizer_;
  std::optional<Autoencoder> autoencoder_;
  std::size_t rounds_since_fit_ = 0;
};

}  // namespace fedwatch

#endif  // FEDWATCH_DETECTOR_H_
