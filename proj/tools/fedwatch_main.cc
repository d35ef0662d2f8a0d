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

// fedwatch command line: run | compare | inspect | validate.
//
// Exit codes: 0 ok, 1 configuration error, 2 runtime error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "fedwatch/config.h"
#include "fedwatch/errors.h"
#include "fedwatch/experiment.h"

namespace fs = std::filesystem;
using fedwatch::ConfigError;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Turns leftover "--a.b value" / "--a.b=value" tokens into overrides.
Overrides parse_overrides(const std::vector<std::string>& extras) {
  Overrides out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() == 2) {
      throw ConfigError(tok, "expected --key value");
    }
    std::string key = tok.substr(2);
    if (auto eq = key.find('='); eq != std::string::npos) {
      out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size()) throw ConfigError(key, "missing value");
    out.emplace_back(std::move(key), extras[++i]);
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

void print_summary(const fedwatch::ExperimentSummary& s, const fs::path& dir) {
  std::printf("run %s  method=%s attack=%s rounds=%zu\n", s.config_hash.c_str(),
              std::string(fedwatch::to_string(s.method)).c_str(), s.attack.c_str(), s.rounds_run);
  std::printf("  final accuracy %.4f  loss %.4f\n", s.final_accuracy, s.final_loss);
  std::printf("  mean precision %s  mean recall %s  fallback rounds %zu\n",
              format_optional(s.mean_precision).c_str(), format_optional(s.mean_recall).c_str(),
              s.fallback_rounds);
  std::printf("  output %s  (%.1f s)\n", dir.string().c_str(), s.wall_clock_seconds);
}

int cmd_run(const std::string& config_path, const Overrides& overrides, bool quiet) {
  const auto cfg = fedwatch::load_config(config_path, overrides);
  fedwatch::RoundCallback progress;
  if (!quiet) {
    progress = [](const fedwatch::RoundRecord& r) {
      std::fprintf(stderr, "round %zu%s acc=%.4f precision=%s recall=%s%s\n", r.round,
                   r.warmup ? " (warm-up)" : "", r.accuracy, format_optional(r.precision).c_str(),
                   format_optional(r.recall).c_str(), r.fell_back ? " fallback" : "");
    };
  }
  const auto result = fedwatch::run_experiment(cfg, progress);
  const auto dir = fedwatch::write_run(cfg, result, cfg.output.dir);
  print_summary(result.summary, dir);
  return kExitOk;
}

int cmd_compare(const std::string& config_path, const Overrides& overrides,
                const std::string& methods_text, const std::string& attacks_text,
                std::size_t jobs) {
  const auto cfg = fedwatch::load_config(config_path, overrides);
  std::vector<fedwatch::AggregationMethod> methods;
  for (const auto& m : split_list(methods_text)) {
    try {
      methods.push_back(fedwatch::parse_aggregation_method(m));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("methods", e.what());
    }
  }
  const auto attacks = split_list(attacks_text);
  for (const auto& a : attacks) {
    if (a == "none") continue;
    try {
      fedwatch::parse_attack_kind(a);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("attacks", e.what());
    }
  }
  if (methods.empty()) throw ConfigError("methods", "no methods given");
  if (attacks.empty()) throw ConfigError("attacks", "no attacks given");

  const auto cells = fedwatch::compare_methods(cfg, methods, attacks, jobs);
  for (const auto& cell : cells) {
    fedwatch::write_run(fedwatch::cell_config(cfg, cell.method, cell.attack), cell.result,
                        cfg.output.dir);
  }
  const std::string table = fedwatch::comparison_csv(cells);
  const fs::path dir = fs::path(cfg.output.dir) / ("compare-" + fedwatch::config_hash(cfg));
  fs::create_directories(dir);
  std::ofstream(dir / "comparison.csv", std::ios::binary) << table;
  std::cout << table;
  std::printf("table written to %s\n", (dir / "comparison.csv").string().c_str());
  return kExitOk;
}

int cmd_inspect(const fs::path& run_dir, std::size_t round) {
  const fs::path path = run_dir / "anomalies.csv";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::printf("%-8s %-8s %-14s %-12s %-12s %-7s\n", "client", "attacked", "error", "anomaly",
              "credit", "flagged");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) f.push_back(cell);
    if (f.size() != 8 || std::stoul(f[1]) != round) continue;
    std::printf("%-8s %-8s %-14s %-12s %-12s %-7s\n", f[2].c_str(), f[3] == "1" ? "yes" : "no",
                f[4].c_str(), f[5].c_str(), f[6].c_str(), f[7] == "1" ? "yes" : "no");
    ++rows;
  }
  if (rows == 0) {
    throw std::runtime_error("no anomaly report for round " + std::to_string(round));
  }
  return kExitOk;
}

int cmd_validate(const std::string& config_path, const Overrides& overrides) {
  const auto cfg = fedwatch::load_config(config_path, overrides);
  std::printf("ok %s\n", fedwatch::config_hash(cfg).c_str());
  std::cout << fedwatch::config_to_json(cfg).dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedwatch: federated learning simulator with update anomaly detection"};
  app.require_subcommand(1);

  std::string config_path;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("-c,--config", config_path, "JSON config file (defaults if omitted)");
  run->add_flag("-q,--quiet", quiet, "no per-round progress");
  run->allow_extras();

  std::string methods = "fedavg,credit_score,thresholding,krum,geomed,trimmed_mean";
  std::string attacks = "sign_flip,additive_noise,gradient_ascent";
  std::size_t jobs = 1;
  auto* compare = app.add_subcommand("compare", "run a method x attack grid");
  compare->add_option("-c,--config", config_path, "JSON config file (defaults if omitted)");
  compare->add_option("--methods", methods, "comma-separated methods")->capture_default_str();
  compare->add_option("--attacks", attacks, "comma-separated attacks, 'none' for clean")
      ->capture_default_str();
  compare->add_option("-j,--jobs", jobs, "grid cells run concurrently")->capture_default_str();
  compare->allow_extras();

  std::string run_dir;
  std::size_t round = 0;
  auto* inspect = app.add_subcommand("inspect", "print one round's anomaly report");
  inspect->add_option("run_dir", run_dir, "output directory of a run")->required();
  inspect->add_option("-r,--round", round, "round index")->required();

  auto* validate = app.add_subcommand("validate", "check a config and print it with defaults");
  validate->add_option("-c,--config", config_path, "JSON config file (defaults if omitted)");
  validate->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, parse_overrides(run->remaining()), quiet);
    if (*compare) {
      return cmd_compare(config_path, parse_overrides(compare->remaining()), methods, attacks,
                         jobs);
    }
    if (*inspect) return cmd_inspect(run_dir, round);
    if (*validate) return cmd_validate(config_path, parse_overrides(validate->remaining()));
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
