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

#include "fedwatch/experiment.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "fedwatch/dataset.h"
#include "fedwatch/errors.h"
#include "fedwatch/rng.h"

namespace fedwatch {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string general9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string optional6(const std::optional<double>& v) { return v ? fixed6(*v) : std::string(); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

std::string attack_label(const std::optional<AttackSpec>& attack) {
  return attack ? std::string(to_string(attack->kind)) : std::string("none");
}

Federation build_federation(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::uint64_t seed = cfg.seed;

  LabeledDataset all;
  if (cfg.dataset.source == "synthetic") {
    all = generate_synthetic_dataset(cfg.dataset.classes, cfg.dataset.samples,
                                     cfg.dataset.input_dim, cfg.dataset.noise_std,
                                     split_seed(seed, {seed_tag::kDataset}),
                                     cfg.dataset.feature_scale);
  } else {
    all = load_image_dataset(cfg.dataset.path);
  }
  const std::size_t classes = std::max(count_classes(all),
                                       cfg.dataset.source == "synthetic" ? cfg.dataset.classes : 0);
  const std::size_t input_dim = static_cast<std::size_t>(all.features.cols());
  auto [train_set, test_set] =
      split_train_test(all, cfg.dataset.test_fraction, split_seed(seed, {seed_tag::kTestSplit}));
  auto clients = partition_non_iid(train_set, cfg.federation.total_clients,
                                   cfg.dataset.concentration,
                                   split_seed(seed, {seed_tag::kPartition}));

  auto layers = model_layers(cfg, input_dim, classes);
  Network model = Network::initialize(layers, split_seed(seed, {seed_tag::kModelInit}));

  FederationConfig fed = cfg.federation;
  fed.master_seed = seed;

  std::optional<Detector> detector;
  if (uses_detector(fed.method)) {
    const std::size_t source_layer =
        cfg.surrogate.source_layer.value_or(last_hidden_layer(layers));
    if (source_layer >= layers.size()) {
      throw ConfigError("surrogate.source_layer", "exceeds the number of model layers");
    }
    const std::size_t source_size =
        surrogate_source_size(layers, cfg.surrogate.mode, source_layer);
    const std::size_t dim = std::min(cfg.surrogate.target_dim, source_size);
    SurrogateSpec spec = build_surrogate_spec(layers, cfg.surrogate.mode, dim, source_layer,
                                              split_seed(seed, {seed_tag::kSurrogate}));
    DetectorConfig dcfg;
    dcfg.autoencoder = cfg.autoencoder;
    dcfg.autoencoder.seed = split_seed(seed, {seed_tag::kAutoencoder});
    dcfg.exponent = cfg.credit_exponent;
    dcfg.rule = cfg.threshold;
    dcfg.paper_exact_thresholding = cfg.paper_exact_thresholding;
    dcfg.standardize = cfg.surrogate.standardize;
    dcfg.retrain_every = cfg.retrain_every;
    detector.emplace(std::move(spec), std::move(dcfg));
  }
  return Federation(std::move(fed), std::move(clients), std::move(model), std::move(test_set),
                    cfg.attack, cfg.baselines, std::move(detector));
}

ExperimentSummary summarize(const ExperimentConfig& cfg, const std::vector<RoundRecord>& records,
                            double initial_accuracy, double initial_loss) {
  ExperimentSummary s;
  s.config_hash = config_hash(cfg);
  s.method = cfg.federation.method;
  s.attack = attack_label(cfg.attack);
  s.rounds_run = records.size();
  s.final_accuracy = records.empty() ? initial_accuracy : records.back().accuracy;
  s.final_loss = records.empty() ? initial_loss : records.back().loss;
  s.accuracy_target = cfg.output.accuracy_target;
  double precision_sum = 0.0, recall_sum = 0.0;
  std::size_t precision_n = 0, recall_n = 0;
  for (const auto& r : records) {
    if (r.precision) {
      precision_sum += *r.precision;
      ++precision_n;
    }
    if (r.recall) {
      recall_sum += *r.recall;
      ++recall_n;
    }
    if (r.fell_back) ++s.fallback_rounds;
    if (!s.rounds_to_target && r.accuracy >= s.accuracy_target) s.rounds_to_target = r.round;
  }
  if (precision_n > 0) s.mean_precision = precision_sum / static_cast<double>(precision_n);
  if (recall_n > 0) s.mean_recall = recall_sum / static_cast<double>(recall_n);
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RoundCallback& on_round) {
  const auto start = std::chrono::steady_clock::now();
  Federation federation = build_federation(cfg);
  WeightVector global = federation.model().params();
  const Evaluation initial = evaluate(federation.model(), federation.test_set());

  ExperimentResult result;
  const std::size_t total_rounds = cfg.federation.warmup_rounds + cfg.federation.rounds;
  result.records.reserve(total_rounds);
  for (std::size_t round = 0; round < total_rounds; ++round) {
    RoundResult step = federation.run_round(global, round);
    global = std::move(step.weights);
    if (on_round) on_round(step.record);
    result.records.push_back(std::move(step.record));
  }
  result.final_weights = std::move(global);
  result.summary = summarize(cfg, result.records, initial.accuracy, initial.loss);
  result.summary.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string rounds_csv(const std::string& config_hash, const std::vector<RoundRecord>& records) {
  std::string out =
      "config_hash,round,phase,method,attack,accuracy,loss,precision,recall,fallback\n";
  for (const auto& r : records) {
    out += config_hash;
    out += ',' + std::to_string(r.round);
    out += r.warmup ? ",warmup" : ",main";
    out += ',' + std::string(r.warmup ? "fedavg" : to_string(r.method));
    out += ',' + (r.attack ? std::string(to_string(*r.attack)) : std::string("none"));
    out += ',' + fixed6(r.accuracy);
    out += ',' + fixed6(r.loss);
    out += ',' + optional6(r.precision);
    out += ',' + optional6(r.recall);
    out += r.fell_back ? ",1\n" : ",0\n";
  }
  return out;
}

std::string anomalies_csv(const std::string& config_hash, const std::vector<RoundRecord>& records) {
  std::string out = "config_hash,round,client_id,attacked,error,anomaly_score,credit,flagged\n";
  for (const auto& r : records) {
    if (!r.report) continue;
    const std::set<ClientId> attacked(r.attacked.begin(), r.attacked.end());
    for (const auto& c : r.report->clients) {
      out += config_hash;
      out += ',' + std::to_string(r.round);
      out += ',' + std::to_string(c.client_id);
      out += attacked.contains(c.client_id) ? ",1" : ",0";
      out += ',' + general9(c.error);
      out += ',' + general9(c.anomaly);
      out += ',' + general9(c.credit);
      out += c.flagged ? ",1\n" : ",0\n";
    }
  }
  return out;
}

std::string summary_json(const ExperimentSummary& s) {
  nlohmann::json j;
  j["config_hash"] = s.config_hash;
  j["method"] = std::string(to_string(s.method));
  j["attack"] = s.attack;
  j["rounds_run"] = s.rounds_run;
  j["final_accuracy"] = s.final_accuracy;
  j["final_loss"] = std::isfinite(s.final_loss) ? nlohmann::json(s.final_loss) : nlohmann::json(nullptr);
  j["mean_precision"] = s.mean_precision ? nlohmann::json(*s.mean_precision) : nlohmann::json(nullptr);
  j["mean_recall"] = s.mean_recall ? nlohmann::json(*s.mean_recall) : nlohmann::json(nullptr);
  j["accuracy_target"] = s.accuracy_target;
  j["rounds_to_target"] =
      s.rounds_to_target ? nlohmann::json(*s.rounds_to_target) : nlohmann::json(nullptr);
  j["fallback_rounds"] = s.fallback_rounds;
  j["wall_clock_seconds"] = s.wall_clock_seconds;
  return j.dump(2) + "\n";
}

std::filesystem::path write_run(const ExperimentConfig& cfg, const ExperimentResult& result,
                                const std::filesystem::path& root) {
  const std::string hash = config_hash(cfg);
  const auto dir = root / hash;
  std::filesystem::create_directories(dir);
  write_file(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  write_file(dir / "rounds.csv", rounds_csv(hash, result.records));
  write_file(dir / "anomalies.csv", anomalies_csv(hash, result.records));
  write_file(dir / "summary.json", summary_json(result.summary));
  return dir;
}

ExperimentConfig cell_config(const ExperimentConfig& base, AggregationMethod method,
                             const std::string& attack) {
  ExperimentConfig cfg = base;
  cfg.federation.method = method;
  if (attack == "none") {
    cfg.attack.reset();
  } else {
    AttackSpec spec = base.attack.value_or(AttackSpec{});
    spec.kind = parse_attack_kind(attack);
    cfg.attack = spec;
  }
  return cfg;
}

std::vector<ComparisonCell> compare_methods(const ExperimentConfig& base,
                                            const std::vector<AggregationMethod>& methods,
                                            const std::vector<std::string>& attacks,
                                            std::size_t parallel_cells) {
  std::vector<ComparisonCell> cells;
  std::vector<ExperimentConfig> configs;
  for (const auto& attack : attacks) {
    for (auto method : methods) {
      configs.push_back(cell_config(base, method, attack));
      cells.push_back(ComparisonCell{attack, method, {}});
    }
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        cells[i].result = run_experiment(configs[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(parallel_cells, cells.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return cells;
}

std::string comparison_csv(const std::vector<ComparisonCell>& cells) {
  std::string out = "attack,method,final_accuracy,mean_precision,mean_recall,config_hash\n";
  for (const auto& c : cells) {
    const auto& s = c.result.summary;
    out += c.attack;
    out += ',' + std::string(to_string(c.method));
    out += ',' + fixed6(s.final_accuracy);
    out += ',' + optional6(s.mean_precision);
    out += ',' + optional6(s.mean_recall);
    out += ',' + s.config_hash + '\n';
  }
  return out;
}

}  // namespace fedwatch
