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

#include "fedwatch/config.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "fedwatch/errors.h"

namespace fedwatch {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const json* take(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, std::size_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
        throw ConfigError(join(path_, key), "expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void read_seed(const std::string& key, std::uint64_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                      v->get<std::int64_t>() < 0)) {
        throw ConfigError(join(path_, key), "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void read(const std::string& key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(join(path_, key), "expected a number");
      out = v->get<double>();
    }
  }

  void read(const std::string& key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(join(path_, key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void read(const std::string& key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(join(path_, key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void read(const std::string& key, std::vector<std::size_t>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) throw ConfigError(join(path_, key), "expected an array of integers");
      std::vector<std::size_t> values;
      for (const auto& item : *v) {
        if (!item.is_number_integer() || item.get<std::int64_t>() <= 0) {
          throw ConfigError(join(path_, key), "expected positive integers");
        }
        values.push_back(item.get<std::size_t>());
      }
      out = std::move(values);
    }
  }

  // Enumerations given as strings.
  template <typename Parse>
  void read_enum(const std::string& key, Parse&& parse) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(join(path_, key), "expected a string");
      try {
        parse(v->get<std::string>());
      } catch (const InputError& e) {
        throw ConfigError(join(path_, key), e.what());
      }
    }
  }

  Section child(const std::string& key) {
    static const json kEmpty = json::object();
    const json* v = take(key);
    return Section(v ? *v : kEmpty, join(path_, key));
  }

  std::string path_of(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

json threshold_to_json(const ThresholdRule& rule) {
  if (rule.kind == ThresholdRule::Kind::kExplicit) return rule.value;
  return std::string(to_string(rule.kind));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.source != "synthetic" && dataset.source != "image") {
    throw ConfigError("dataset.source", "must be \"synthetic\" or \"image\"");
  }
  if (dataset.source == "synthetic") {
    if (dataset.classes < 2) throw ConfigError("dataset.classes", "must be at least 2");
    if (dataset.samples == 0) throw ConfigError("dataset.samples", "must be positive");
    if (dataset.input_dim == 0) throw ConfigError("dataset.input_dim", "must be positive");
    if (!(dataset.noise_std >= 0.0)) throw ConfigError("dataset.noise_std", "must be non-negative");
    if (!(dataset.feature_scale > 0.0)) {
      throw ConfigError("dataset.feature_scale", "must be positive");
    }
  } else if (dataset.path.empty()) {
    throw ConfigError("dataset.path", "required for image datasets");
  }
  if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0)) {
    throw ConfigError("dataset.test_fraction", "must be in (0, 1)");
  }
  if (!(dataset.concentration > 0.0)) {
    throw ConfigError("dataset.concentration", "must be positive");
  }
  federation.validate();
  if (attack) {
    try {
      attack->validate();
    } catch (const InputError& e) {
      throw ConfigError("attack.noise_std", e.what());
    }
  }
  if (surrogate.target_dim == 0) throw ConfigError("surrogate.target_dim", "must be positive");
  if (surrogate.source_layer && *surrogate.source_layer > model.hidden_sizes.size()) {
    throw ConfigError("surrogate.source_layer", "exceeds the number of model layers");
  }
  try {
    autoencoder.validate();
  } catch (const InputError& e) {
    throw ConfigError("autoencoder", e.what());
  }
  if (!(credit_exponent >= 0.0)) throw ConfigError("detection.L", "must be non-negative");
  if (threshold.kind == ThresholdRule::Kind::kExplicit && !(threshold.value >= 1.0)) {
    throw ConfigError("detection.threshold", "explicit threshold must be at least 1");
  }
  if (!(baselines.trim_fraction >= 0.0 && baselines.trim_fraction < 0.5)) {
    throw ConfigError("baselines.trim_fraction", "must be in [0, 0.5)");
  }
  if (!(baselines.geomed_tol > 0.0)) throw ConfigError("baselines.geomed_tol", "must be positive");
  if (baselines.geomed_max_iters == 0) {
    throw ConfigError("baselines.geomed_max_iters", "must be positive");
  }
  if (!(output.accuracy_target >= 0.0 && output.accuracy_target <= 1.0)) {
    throw ConfigError("output.accuracy_target", "must be in [0, 1]");
  }
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  Section root(doc, "");
  root.read_seed("seed", cfg.seed);
  cfg.federation.master_seed = cfg.seed;

  {
    Section s = root.child("dataset");
    s.read("source", cfg.dataset.source);
    s.read("classes", cfg.dataset.classes);
    s.read("samples", cfg.dataset.samples);
    s.read("input_dim", cfg.dataset.input_dim);
    s.read("noise_std", cfg.dataset.noise_std);
    s.read("feature_scale", cfg.dataset.feature_scale);
    s.read("path", cfg.dataset.path);
    s.read("test_fraction", cfg.dataset.test_fraction);
    s.read("concentration", cfg.dataset.concentration);
    s.finish();
  }
  {
    Section s = root.child("model");
    s.read("hidden_sizes", cfg.model.hidden_sizes);
    s.finish();
  }
  {
    Section s = root.child("federation");
    auto& f = cfg.federation;
    s.read("total_clients", f.total_clients);
    s.read("clients_per_round", f.clients_per_round);
    s.read("rounds", f.rounds);
    s.read("warmup_rounds", f.warmup_rounds);
    s.read("abnormal_fraction", f.abnormal_fraction);
    s.read_enum("method", [&](const std::string& v) { f.method = parse_aggregation_method(v); });
    s.read("allow_attacks_in_warmup", f.allow_attacks_in_warmup);
    s.read("threads", f.threads);
    s.finish();
  }
  {
    Section s = root.child("train");
    s.read("learning_rate", cfg.federation.train.learning_rate);
    s.read("batch_size", cfg.federation.train.batch_size);
    s.read("epochs", cfg.federation.train.epochs);
    s.finish();
  }
  {
    Section s = root.child("attack");
    AttackSpec spec;
    bool none = false;
    s.read_enum("kind", [&](const std::string& v) {
      if (v == "none") {
        none = true;
      } else {
        spec.kind = parse_attack_kind(v);
      }
    });
    s.read("noise_std", spec.noise_std);
    s.finish();
    cfg.attack = none ? std::nullopt : std::optional<AttackSpec>(spec);
  }
  {
    Section s = root.child("surrogate");
    s.read_enum("mode", [&](const std::string& v) { cfg.surrogate.mode = parse_surrogate_mode(v); });
    s.read("target_dim", cfg.surrogate.target_dim);
    if (const json* v = s.take("source_layer"); v && !v->is_null()) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
        throw ConfigError("surrogate.source_layer", "expected a non-negative integer or null");
      }
      cfg.surrogate.source_layer = v->get<std::size_t>();
    }
    s.read("standardize", cfg.surrogate.standardize);
    s.finish();
  }
  {
    Section s = root.child("autoencoder");
    s.read("hidden_sizes", cfg.autoencoder.hidden_sizes);
    s.read("batch_size", cfg.autoencoder.batch_size);
    s.read("dropout_rate", cfg.autoencoder.dropout_rate);
    s.read("epochs", cfg.autoencoder.epochs);
    s.read("learning_rate", cfg.autoencoder.learning_rate);
    s.read("retrain_every", cfg.retrain_every);
    s.finish();
  }
  {
    Section s = root.child("detection");
    s.read("L", cfg.credit_exponent);
    if (const json* v = s.take("threshold")) {
      if (v->is_number()) {
        if (!(v->get<double>() >= 1.0)) {
          throw ConfigError("detection.threshold", "explicit threshold must be at least 1");
        }
        cfg.threshold = ThresholdRule::fixed(v->get<double>());
      } else if (v->is_string() && v->get<std::string>() == "mean") {
        cfg.threshold = ThresholdRule::mean();
      } else if (v->is_string() && v->get<std::string>() == "median") {
        cfg.threshold = ThresholdRule::median();
      } else {
        throw ConfigError("detection.threshold", "expected \"mean\", \"median\" or a number");
      }
    }
    s.read("paper_exact_thresholding", cfg.paper_exact_thresholding);
    s.finish();
  }
  {
    Section s = root.child("baselines");
    if (const json* v = s.take("krum_f"); v && !v->is_null()) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
        throw ConfigError("baselines.krum_f", "expected a non-negative integer or null");
      }
      cfg.baselines.krum_f = v->get<std::size_t>();
    }
    s.read("trim_fraction", cfg.baselines.trim_fraction);
    s.read("geomed_tol", cfg.baselines.geomed_tol);
    s.read("geomed_max_iters", cfg.baselines.geomed_max_iters);
    s.finish();
  }
  {
    Section s = root.child("output");
    s.read("dir", cfg.output.dir);
    s.read("accuracy_target", cfg.output.accuracy_target);
    s.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["seed"] = cfg.seed;
  doc["dataset"] = {{"source", cfg.dataset.source},
                    {"classes", cfg.dataset.classes},
                    {"samples", cfg.dataset.samples},
                    {"input_dim", cfg.dataset.input_dim},
                    {"noise_std", cfg.dataset.noise_std},
                    {"feature_scale", cfg.dataset.feature_scale},
                    {"path", cfg.dataset.path},
                    {"test_fraction", cfg.dataset.test_fraction},
                    {"concentration", cfg.dataset.concentration}};
  doc["model"] = {{"hidden_sizes", cfg.model.hidden_sizes}};
  const auto& f = cfg.federation;
  doc["federation"] = {{"total_clients", f.total_clients},
                       {"clients_per_round", f.clients_per_round},
                       {"rounds", f.rounds},
                       {"warmup_rounds", f.warmup_rounds},
                       {"abnormal_fraction", f.abnormal_fraction},
                       {"method", std::string(to_string(f.method))},
                       {"allow_attacks_in_warmup", f.allow_attacks_in_warmup},
                       {"threads", f.threads}};
  doc["train"] = {{"learning_rate", f.train.learning_rate},
                  {"batch_size", f.train.batch_size},
                  {"epochs", f.train.epochs}};
  if (cfg.attack) {
    doc["attack"] = {{"kind", std::string(to_string(cfg.attack->kind))},
                     {"noise_std", cfg.attack->noise_std}};
  } else {
    doc["attack"] = {{"kind", "none"}, {"noise_std", AttackSpec{}.noise_std}};
  }
  doc["surrogate"] = {{"mode", std::string(to_string(cfg.surrogate.mode))},
                      {"target_dim", cfg.surrogate.target_dim},
                      {"source_layer", cfg.surrogate.source_layer
                                           ? json(*cfg.surrogate.source_layer)
                                           : json(nullptr)},
                      {"standardize", cfg.surrogate.standardize}};
  doc["autoencoder"] = {{"hidden_sizes", cfg.autoencoder.hidden_sizes},
                        {"batch_size", cfg.autoencoder.batch_size},
                        {"dropout_rate", cfg.autoencoder.dropout_rate},
                        {"epochs", cfg.autoencoder.epochs},
                        {"learning_rate", cfg.autoencoder.learning_rate},
                        {"retrain_every", cfg.retrain_every}};
  doc["detection"] = {{"L", cfg.credit_exponent},
                      {"threshold", threshold_to_json(cfg.threshold)},
                      {"paper_exact_thresholding", cfg.paper_exact_thresholding}};
  doc["baselines"] = {
      {"krum_f", cfg.baselines.krum_f ? json(*cfg.baselines.krum_f) : json(nullptr)},
      {"trim_fraction", cfg.baselines.trim_fraction},
      {"geomed_tol", cfg.baselines.geomed_tol},
      {"geomed_max_iters", cfg.baselines.geomed_max_iters}};
  doc["output"] = {{"dir", cfg.output.dir}, {"accuracy_target", cfg.output.accuracy_target}};
  return doc;
}

void apply_overrides(json& doc, const std::vector<std::pair<std::string, std::string>>& overrides) {
  // The schema as a document of defaults: a path is valid iff it exists there.
  const json schema = config_to_json(ExperimentConfig{});
  for (const auto& [path, raw] : overrides) {
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    const json* schema_node = &schema;
    json* node = &doc;
    std::stringstream parts(path);
    std::string key;
    std::vector<std::string> keys;
    while (std::getline(parts, key, '.')) keys.push_back(key);
    if (keys.empty()) throw ConfigError(path, "empty override key");
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (!schema_node->is_object() || !schema_node->contains(keys[i])) {
        throw ConfigError(path, "unknown key");
      }
      schema_node = &(*schema_node)[keys[i]];
      if (!node->is_object()) *node = json::object();
      node = &(*node)[keys[i]];
    }
    if (schema_node->is_object()) throw ConfigError(path, "cannot override a whole section");
    *node = std::move(value);
  }
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path.string());
    try {
      doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
      throw ConfigError("", std::string("parse error in ") + path.string() + ": " + e.what());
    }
  }
  apply_overrides(doc, overrides);
  if (const char* out = std::getenv(kOutputDirEnv); out != nullptr && *out != '\0') {
    doc["output"]["dir"] = out;
  }
  return config_from_json(doc);
}

std::string serialize_config(const ExperimentConfig& cfg) { return config_to_json(cfg).dump(); }

std::string config_hash(const ExperimentConfig& cfg) {
  json doc = config_to_json(cfg);
  doc["federation"].erase("threads");
  doc.erase("output");
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<LayerSpec> model_layers(const ExperimentConfig& cfg, std::size_t input_dim,
                                    std::size_t classes) {
  std::vector<LayerSpec> layers;
  std::size_t prev = input_dim;
  for (auto h : cfg.model.hidden_sizes) {
    layers.push_back({prev, h, Activation::kRelu});
    prev = h;
  }
  layers.push_back({prev, classes, Activation::kSoftmax});
  return layers;
}

}  // namespace fedwatch
