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

// Round structure of the simulated federation.
//
// A fixed subset of clients is designated abnormal at setup. Rounds before
// `warmup_rounds` select honest clients only, aggregate with plain FedAvg
// and feed the detector's training buffer; the detector is fitted at the
// end of the last warm-up round. Later rounds select exactly
// floor(abnormal_fraction * K) abnormal clients and aggregate with the
// configured method.
//
// All randomness is derived from master_seed with split_seed, keyed by
// purpose, client id and round, so results do not depend on the number of
// worker threads.

#ifndef FEDWATCH_FEDERATION_H_
#define FEDWATCH_FEDERATION_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedwatch/aggregation.h"
#include "fedwatch/attacks.h"
#include "fedwatch/detector.h"
#include "fedwatch/nn.h"

namespace fedwatch {

// Purpose tags for split_seed(master_seed, {tag, ...}).
namespace seed_tag {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kTestSplit = 2;
inline constexpr std::uint64_t kPartition = 3;
inline constexpr std::uint64_t kAttackers = 4;
inline constexpr std::uint64_t kModelInit = 5;
inline constexpr std::uint64_t kSurrogate = 6;
inline constexpr std::uint64_t kAutoencoder = 7;
inline constexpr std::uint64_t kSelection = 8;
inline constexpr std::uint64_t kClient = 9;
}  // namespace seed_tag

struct ClientState {
  ClientId client_id = 0;
  LabeledDataset dataset;
  std::optional<AttackSpec> attack;

  std::size_t sample_count() const { return dataset.size(); }
};

// Seed of a client's stream in a given round.
std::uint64_t client_stream_seed(std::uint64_t master_seed, ClientId client, std::size_t round);

// Splits `data` over `total_clients` clients. For every class, client
// shares are drawn from a symmetric Dirichlet(concentration) and the
// class's samples (in a seeded shuffle) are cut at the cumulative shares.
// Draws are repeated until every client holds at least one sample.
// Client ids are 0..total_clients-1.
std::vector<ClientState> partition_non_iid(const LabeledDataset& data, std::size_t total_clients,
                                           double concentration, std::uint64_t seed);

struct FederationConfig {
  std::size_t total_clients = 60;
  std::size_t clients_per_round = 20;
  std::size_t rounds = 100;
  double abnormal_fraction = 0.3;
  AggregationMethod method = AggregationMethod::kThresholding;
  TrainConfig train;
  std::size_t warmup_rounds = 10;
  std::uint64_t master_seed = 0;
  bool allow_attacks_in_warmup = false;
  // Worker threads for local training; results are identical for any value.
  std::size_t threads = 1;

  std::size_t attackers_per_round() const;
  // Number of clients designated abnormal at setup.
  std::size_t designated_attackers() const;
  // Throws ConfigError naming the field.
  void validate() const;
};

// Positions (in ascending client-id order) of the clients designated
// abnormal, chosen with the kAttackers stream. Equal to client ids for
// partitions produced by partition_non_iid.
std::set<std::size_t> designate_attackers(const FederationConfig& cfg);

struct RoundRecord {
  std::size_t round = 0;
  AggregationMethod method = AggregationMethod::kFedAvg;
  bool warmup = false;
  // Attack active this round; unset in warm-up rounds and clean runs.
  std::optional<AttackKind> attack;
  double accuracy = 0.0;
  double loss = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<AnomalyReport> report;
  std::vector<ClientId> selected;
  std::vector<ClientId> attacked;
  bool fell_back = false;
  std::string fallback_reason;
};

// Detection precision/recall of `flagged` against `attacked`. Both are
// unset when nobody attacked; precision is also unset when nothing was
// flagged.
void fill_detection_metrics(RoundRecord& record, const std::vector<ClientId>& flagged);

struct RoundResult {
  WeightVector weights;
  RoundRecord record;
};

class Federation {
 public:
  // `detector` is required when cfg.method uses one. Throws ConfigError on
  // an invalid configuration.
  Federation(FederationConfig cfg, std::vector<ClientState> clients, Network model,
             LabeledDataset test_set, std::optional<AttackSpec> attack,
             BaselineParams baselines, std::optional<Detector> detector);

  const FederationConfig& config() const { return cfg_; }
  const std::vector<ClientState>& clients() const { return clients_; }
  const Network& model() const { return model_; }
  const LabeledDataset& test_set() const { return test_set_; }
  const std::optional<Detector>& detector() const { return detector_; }
  const std::set<ClientId>& attackers() const { return attackers_; }
  std::size_t total_samples() const;

  bool is_warmup(std::size_t round) const { return round < cfg_.warmup_rounds; }

  // Indices into clients(), ascending client id.
  std::vector<std::size_t> select_round_clients(std::size_t round) const;

  // Trains one client from `global_weights` and applies its attack hook if
  // the attack is active.
  ClientUpdate local_update(std::size_t client_index, const WeightVector& global_weights,
                            std::size_t round, bool attack_active) const;

  RoundResult run_round(const WeightVector& global_weights, std::size_t round);

 private:
  WeightVector aggregate(const std::vector<ClientUpdate>& updates, RoundRecord& record,
                         const WeightVector& previous);

  FederationConfig cfg_;
  std::vector<ClientState> clients_;
  Network model_;
  LabeledDataset test_set_;
  std::optional<AttackSpec> attack_;
  BaselineParams baselines_;
  std::optional<Detector> detector_;
  std::set<ClientId> attackers_;
};

}  // namespace fedwatch

#endif  // FEDWATCH_FEDERATION_H_
