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

#include "fedwatch/federation.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "fedwatch/errors.h"
#include "fedwatch/rng.h"

namespace fedwatch {

std::uint64_t client_stream_seed(std::uint64_t master_seed, ClientId client, std::size_t round) {
  return split_seed(master_seed, {seed_tag::kClient, static_cast<std::uint64_t>(client),
                                  static_cast<std::uint64_t>(round)});
}

std::vector<ClientState> partition_non_iid(const LabeledDataset& data, std::size_t total_clients,
                                           double concentration, std::uint64_t seed) {
  if (total_clients == 0) throw InputError("partition needs at least one client");
  if (data.size() < total_clients) {
    throw InputError("dataset has " + std::to_string(data.size()) + " samples for " +
                     std::to_string(total_clients) + " clients");
  }
  if (!(concentration > 0.0)) throw InputError("Dirichlet concentration must be positive");
  if (static_cast<std::size_t>(data.features.rows()) != data.size()) {
    throw ShapeError("dataset feature rows and label count differ");
  }

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> assignment;
  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxAttempts) {
      throw InputError("could not draw a partition with every client non-empty");
    }
    assignment.assign(total_clients, {});
    for (auto& [label, indices] : by_class) {
      std::vector<std::size_t> pool = indices;
      rng.shuffle(std::span<std::size_t>(pool));
      const auto shares = rng.dirichlet(total_clients, concentration);
      double cumulative = 0.0;
      std::size_t start = 0;
      for (std::size_t k = 0; k < total_clients; ++k) {
        cumulative += shares[k];
        std::size_t stop = k + 1 == total_clients
                               ? pool.size()
                               : std::min(pool.size(), static_cast<std::size_t>(std::llround(
                                                           cumulative * static_cast<double>(pool.size()))));
        stop = std::max(stop, start);
        assignment[k].insert(assignment[k].end(), pool.begin() + static_cast<std::ptrdiff_t>(start),
                             pool.begin() + static_cast<std::ptrdiff_t>(stop));
        start = stop;
      }
    }
    const bool all_non_empty = std::all_of(assignment.begin(), assignment.end(),
                                           [](const auto& a) { return !a.empty(); });
    if (all_non_empty) break;
  }

  std::vector<ClientState> clients(total_clients);
  for (std::size_t k = 0; k < total_clients; ++k) {
    auto& rows = assignment[k];
    std::sort(rows.begin(), rows.end());
    ClientState& c = clients[k];
    c.client_id = static_cast<ClientId>(k);
    c.dataset.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
    c.dataset.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      c.dataset.features.row(static_cast<Eigen::Index>(i)) =
          data.features.row(static_cast<Eigen::Index>(rows[i]));
      c.dataset.labels[i] = data.labels[rows[i]];
    }
  }
  return clients;
}

std::size_t FederationConfig::attackers_per_round() const {
  return static_cast<std::size_t>(
      std::floor(abnormal_fraction * static_cast<double>(clients_per_round) + 1e-9));
}

std::size_t FederationConfig::designated_attackers() const {
  const std::size_t quota = attackers_per_round();
  if (quota == 0) return 0;
  const auto wanted = static_cast<std::size_t>(
      std::llround(abnormal_fraction * static_cast<double>(total_clients)));
  const std::size_t most = total_clients - (clients_per_round - quota);
  return std::clamp(wanted, quota, most);
}

void FederationConfig::validate() const {
  if (total_clients == 0) throw ConfigError("federation.total_clients", "must be positive");
  if (clients_per_round == 0 || clients_per_round > total_clients) {
    throw ConfigError("federation.clients_per_round", "must be in [1, total_clients]");
  }
  if (!(abnormal_fraction >= 0.0 && abnormal_fraction < 1.0)) {
    throw ConfigError("federation.abnormal_fraction", "must be in [0, 1)");
  }
  if (attackers_per_round() >= clients_per_round) {
    throw ConfigError("federation.abnormal_fraction",
                      "leaves no honest client in a round");
  }
  if (uses_detector(method) && warmup_rounds == 0) {
    throw ConfigError("federation.warmup_rounds",
                      "detection-based methods need at least one warm-up round");
  }
  if (warmup_rounds > 0 && !allow_attacks_in_warmup &&
      total_clients - designated_attackers() < clients_per_round) {
    throw ConfigError("federation.warmup_rounds",
                      "not enough honest clients to fill an attack-free warm-up round");
  }
  if (threads == 0) throw ConfigError("federation.threads", "must be positive");
  try {
    train.validate();
  } catch (const InputError& e) {
    throw ConfigError("train", e.what());
  }
}

std::set<std::size_t> designate_attackers(const FederationConfig& cfg) {
  Rng rng(split_seed(cfg.master_seed, {seed_tag::kAttackers}));
  const auto picks = rng.sample_without_replacement(cfg.total_clients, cfg.designated_attackers());
  return {picks.begin(), picks.end()};
}

void fill_detection_metrics(RoundRecord& record, const std::vector<ClientId>& flagged) {
  const std::set<ClientId> truth(record.attacked.begin(), record.attacked.end());
  std::size_t true_positive = 0;
  for (ClientId id : flagged) {
    if (truth.contains(id)) ++true_positive;
  }
  record.precision.reset();
  record.recall.reset();
  if (truth.empty()) return;
  if (!flagged.empty()) {
    record.precision = static_cast<double>(true_positive) / static_cast<double>(flagged.size());
  }
  record.recall = static_cast<double>(true_positive) / static_cast<double>(truth.size());
}

Federation::Federation(FederationConfig cfg, std::vector<ClientState> clients, Network model,
                       LabeledDataset test_set, std::optional<AttackSpec> attack,
                       BaselineParams baselines, std::optional<Detector> detector)
    : cfg_(std::move(cfg)),
      clients_(std::move(clients)),
      model_(std::move(model)),
      test_set_(std::move(test_set)),
      attack_(std::move(attack)),
      baselines_(std::move(baselines)),
      detector_(std::move(detector)) {
  cfg_.validate();
  if (clients_.size() != cfg_.total_clients) {
    throw ConfigError("federation.total_clients", "does not match the number of clients");
  }
  std::set<ClientId> ids;
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    if (!ids.insert(clients_[i].client_id).second) {
      throw InputError("duplicate client id " + std::to_string(clients_[i].client_id));
    }
    if (clients_[i].sample_count() == 0) {
      throw InputError("client " + std::to_string(clients_[i].client_id) + " has no data");
    }
  }
  std::sort(clients_.begin(), clients_.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  if (uses_detector(cfg_.method) && !detector_) {
    throw ConfigError("federation.method", "needs a detector");
  }
  if (attack_) {
    attack_->validate();
    for (std::size_t position : designate_attackers(cfg_)) {
      auto& c = clients_[position];
      c.attack = attack_;
      attackers_.insert(c.client_id);
    }
  }
}

std::size_t Federation::total_samples() const {
  std::size_t n = 0;
  for (const auto& c : clients_) n += c.sample_count();
  return n;
}

std::vector<std::size_t> Federation::select_round_clients(std::size_t round) const {
  Rng rng(split_seed(cfg_.master_seed, {seed_tag::kSelection, static_cast<std::uint64_t>(round)}));
  const bool clean = is_warmup(round) && !cfg_.allow_attacks_in_warmup;
  std::vector<std::size_t> honest, abnormal;
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    (clients_[i].attack ? abnormal : honest).push_back(i);
  }
  const std::size_t quota = clean ? 0 : std::min(cfg_.attackers_per_round(), abnormal.size());
  std::vector<std::size_t> selected;
  for (auto p : rng.sample_without_replacement(abnormal.size(), quota)) {
    selected.push_back(abnormal[p]);
  }
  for (auto p : rng.sample_without_replacement(honest.size(), cfg_.clients_per_round - quota)) {
    selected.push_back(honest[p]);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

ClientUpdate Federation::local_update(std::size_t client_index, const WeightVector& global_weights,
                                      std::size_t round, bool attack_active) const {
  const ClientState& client = clients_.at(client_index);
  const std::uint64_t stream = client_stream_seed(cfg_.master_seed, client.client_id, round);
  TrainConfig train_cfg = cfg_.train;
  train_cfg.rng_seed = split_seed(stream, {0});
  const std::optional<AttackSpec> attack = attack_active ? client.attack : std::nullopt;

  const Network start = model_.with_params(global_weights);
  WeightVector trained = train(start, client.dataset, train_cfg, training_direction(attack)).params();
  Rng attack_rng(split_seed(stream, {1}));
  return ClientUpdate{client.client_id, client.sample_count(),
                      apply_post_training(attack, std::move(trained), attack_rng)};
}

WeightVector Federation::aggregate(const std::vector<ClientUpdate>& updates, RoundRecord& record,
                                   const WeightVector& previous) {
  const std::size_t k = updates.size();
  try {
    switch (cfg_.method) {
      case AggregationMethod::kFedAvg:
        return fedavg_aggregate(updates);
      case AggregationMethod::kKrum:
        return krum_select(updates, baselines_.resolved_krum_f(k));
      case AggregationMethod::kGeoMed:
        return geomed_aggregate(updates, baselines_.geomed_tol, baselines_.geomed_max_iters);
      case AggregationMethod::kTrimmedMean:
        return trimmed_mean_aggregate(updates, baselines_.trim_fraction);
      case AggregationMethod::kCreditScore:
      case AggregationMethod::kThresholding: {
        std::map<ClientId, WeightVector> by_id;
        CountMap counts;
        for (const auto& u : updates) {
          by_id[u.client_id] = u.weights;
          counts[u.client_id] = u.sample_count;
        }
        const auto mode = cfg_.method == AggregationMethod::kCreditScore
                              ? WeightingMode::kCreditScore
                              : WeightingMode::kThresholding;
        AnomalyReport report = detector_->score(by_id, counts, mode);
        fill_detection_metrics(record, report.flagged_clients());
        const ScoreMap alpha = report.credits();
        detector_->after_round(by_id, report);
        record.report = std::move(report);
        double mass = 0.0;
        for (const auto& [id, a] : alpha) mass += a;
        if (!(mass > 0.0)) {
          record.fell_back = true;
          record.fallback_reason = "every client received zero weight";
          return previous;
        }
        return weighted_aggregate(updates, alpha);
      }
    }
  } catch (const InputError& e) {
    record.fell_back = true;
    record.fallback_reason = e.what();
    return previous;
  }
  return previous;
}

RoundResult Federation::run_round(const WeightVector& global_weights, std::size_t round) {
  if (global_weights.size() != model_.params().size()) {
    throw ShapeError("global weights do not match the model layout");
  }
  const bool warmup = is_warmup(round);
  const bool attack_phase = !warmup || cfg_.allow_attacks_in_warmup;
  const auto selected = select_round_clients(round);

  std::vector<ClientUpdate> updates(selected.size());
  const std::size_t workers = std::min(cfg_.threads, selected.size());
  auto work = [&](std::size_t worker) {
    for (std::size_t i = worker; i < selected.size(); i += workers) {
      updates[i] = local_update(selected[i], global_weights, round, attack_phase);
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }

  RoundRecord record;
  record.round = round;
  record.method = cfg_.method;
  record.warmup = warmup;
  for (auto idx : selected) {
    const auto& c = clients_[idx];
    record.selected.push_back(c.client_id);
    if (attack_phase && c.attack) record.attacked.push_back(c.client_id);
  }
  if (!record.attacked.empty()) record.attack = attack_->kind;

  WeightVector next;
  if (warmup) {
    next = fedavg_aggregate(updates);
    if (detector_) {
      for (const auto& u : updates) detector_->observe(u.weights);
      if (round + 1 == cfg_.warmup_rounds) detector_->fit();
    }
  } else {
    next = aggregate(updates, record, global_weights);
  }

  const Evaluation eval = evaluate(model_.with_params(next), test_set_);
  record.accuracy = eval.accuracy;
  record.loss = eval.loss;
  return RoundResult{std::move(next), std::move(record)};
}

}  // namespace fedwatch
