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

#ifndef FEDWATCH_EXPERIMENT_H_
#define FEDWATCH_EXPERIMENT_H_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedwatch/config.h"
#include "fedwatch/federation.h"

namespace fedwatch {

struct ExperimentSummary {
  std::string config_hash;
  AggregationMethod method = AggregationMethod::kFedAvg;
  std::string attack;  // attack kind name or "none"
  std::size_t rounds_run = 0;
  double final_accuracy = 0.0;
  double final_loss = 0.0;
  std::optional<double> mean_precision;
  std::optional<double> mean_recall;
  double accuracy_target = 0.0;
  // First round whose accuracy reached accuracy_target.
  std::optional<std::size_t> rounds_to_target;
  std::size_t fallback_rounds = 0;
  double wall_clock_seconds = 0.0;
};

struct ExperimentResult {
  ExperimentSummary summary;
  std::vector<RoundRecord> records;
  WeightVector final_weights;
};

using RoundCallback = std::function<void(const RoundRecord&)>;

// Builds the dataset, partition, model, detector and federation for `cfg`
// without running any round.
Federation build_federation(const ExperimentConfig& cfg);

// Runs warm-up plus federation.rounds rounds. Pure in `cfg` apart from
// wall_clock_seconds.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RoundCallback& on_round = {});

// Summary statistics from records alone.
ExperimentSummary summarize(const ExperimentConfig& cfg, const std::vector<RoundRecord>& records,
                            double initial_accuracy, double initial_loss);

// Byte-stable CSV renderings. Columns:
//   rounds.csv:    config_hash,round,phase,method,attack,accuracy,loss,precision,recall,fallback
//   anomalies.csv: config_hash,round,client_id,attacked,error,anomaly_score,credit,flagged
std::string rounds_csv(const std::string& config_hash, const std::vector<RoundRecord>& records);
std::string anomalies_csv(const std::string& config_hash, const std::vector<RoundRecord>& records);
std::string summary_json(const ExperimentSummary& summary);

// Writes config.json, rounds.csv, anomalies.csv and summary.json under
// <root>/<config-hash>/ and returns that directory.
std::filesystem::path write_run(const ExperimentConfig& cfg, const ExperimentResult& result,
                                const std::filesystem::path& root);

// Label used in tables for an optional attack.
std::string attack_label(const std::optional<AttackSpec>& attack);

struct ComparisonCell {
  std::string attack;
  AggregationMethod method = AggregationMethod::kFedAvg;
  ExperimentResult result;
};

// Runs every (attack, method) pair on top of `base`. Attacks are given by
// name; "none" runs the method without attackers. All cells share the
// base seed and therefore the same dataset and partition. Up to
// `parallel_cells` cells run concurrently; results are in grid order
// (attack-major) either way.
std::vector<ComparisonCell> compare_methods(const ExperimentConfig& base,
                                            const std::vector<AggregationMethod>& methods,
                                            const std::vector<std::string>& attacks,
                                            std::size_t parallel_cells = 1);

// Columns: attack,method,final_accuracy,mean_precision,mean_recall,config_hash
std::string comparison_csv(const std::vector<ComparisonCell>& cells);

// Config of one grid cell.
ExperimentConfig cell_config(const ExperimentConfig& base, AggregationMethod method,
                             const std::string& attack);

}  // namespace fedwatch

#endif  // FEDWATCH_EXPERIMENT_H_
