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

// Experiment configuration: a JSON document whose every key is optional.
// Missing keys take their defaults, unknown keys are rejected, and every
// validation error names the offending field path. See README.md for the
// full schema.

#ifndef FEDWATCH_CONFIG_H_
#define FEDWATCH_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedwatch/aggregation.h"
#include "fedwatch/attacks.h"
#include "fedwatch/detector.h"
#include "fedwatch/federation.h"
#include "fedwatch/surrogate.h"

namespace fedwatch {

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic" or "image"
  std::size_t classes = 10;
  std::size_t samples = 6000;
  std::size_t input_dim = 20;
  double noise_std = 1.0;
  double feature_scale = 1.0;  // expected norm of a class mean
  std::string path;  // image source only
  double test_fraction = 0.2;
  double concentration = 0.5;  // Dirichlet concentration of the client split
};

struct ModelConfig {
  std::vector<std::size_t> hidden_sizes{32};
};

struct SurrogateConfig {
  SurrogateMode mode = SurrogateMode::kLayerSlice;
  // Capped at the size of the source range.
  std::size_t target_dim = 3000;
  // Layer index for layer_slice; unset means the last hidden layer.
  std::optional<std::size_t> source_layer;
  bool standardize = true;
};

struct OutputConfig {
  std::string dir = "runs";
  // Threshold for the rounds-to-accuracy summary statistic.
  double accuracy_target = 0.8;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  ModelConfig model;
  FederationConfig federation;
  // Unset: no attack.
  std::optional<AttackSpec> attack = AttackSpec{};
  SurrogateConfig surrogate;
  AutoencoderConfig autoencoder;
  double credit_exponent = 2.0;  // L
  ThresholdRule threshold = ThresholdRule::mean();
  bool paper_exact_thresholding = false;
  std::size_t retrain_every = 0;
  BaselineParams baselines;
  OutputConfig output;

  // Throws ConfigError naming the field.
  void validate() const;
};

// Environment variable that, when set, replaces output.dir.
inline constexpr const char* kOutputDirEnv = "FEDWATCH_OUTPUT_DIR";

ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Applies "a.b.c" = value overrides to a raw config document before it is
// parsed. Values are read as JSON when they parse as JSON and as strings
// otherwise. Throws ConfigError for paths outside the schema.
void apply_overrides(nlohmann::json& doc,
                     const std::vector<std::pair<std::string, std::string>>& overrides);

// Reads, overrides, validates. An empty path starts from all defaults.
// Throws ConfigError on parse or validation failure.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Canonical compact serialization (sorted keys, defaults filled in).
std::string serialize_config(const ExperimentConfig& cfg);

// 16 hex digits of FNV-1a over the canonical serialization, excluding
// fields that cannot change results (thread count, output settings).
std::string config_hash(const ExperimentConfig& cfg);

// Model layers implied by the config: input_dim -> hidden (relu) ... ->
// classes (softmax).
std::vector<LayerSpec> model_layers(const ExperimentConfig& cfg, std::size_t input_dim,
                                    std::size_t classes);

}  // namespace fedwatch

#endif  // FEDWATCH_CONFIG_H_
