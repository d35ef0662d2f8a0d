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

#include "fedwatch/attacks.h"

#include <cmath>
#include <string>

#include "fedwatch/errors.h"

namespace fedwatch {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kSignFlip:
      return "sign_flip";
    case AttackKind::kAdditiveNoise:
      return "additive_noise";
    case AttackKind::kGradientAscent:
      return "gradient_ascent";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view name) {
  for (AttackKind kind : {AttackKind::kSignFlip, AttackKind::kAdditiveNoise,
                          AttackKind::kGradientAscent}) {
    if (to_string(kind) == name) return kind;
  }
  throw InputError("unknown attack kind '" + std::string(name) + "'");
}

void AttackSpec::validate() const {
  if (kind == AttackKind::kAdditiveNoise && !(noise_std > 0.0 && std::isfinite(noise_std))) {
    throw InputError("noise_std must be positive for additive_noise");
  }
}

WeightVector apply_sign_flip(std::span<const double> weights) {
  WeightVector out(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) out[i] = -weights[i];
  return out;
}

WeightVector apply_additive_noise(std::span<const double> weights, double noise_std,
                                  Rng& rng) {
  if (!(noise_std > 0.0)) throw InputError("noise_std must be positive");
  WeightVector out(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out[i] = weights[i] + noise_std * rng.normal();
  }
  return out;
}

WeightVector apply_gradient_ascent(const Network& global_model, const LabeledDataset& data,
                                   const TrainConfig& cfg) {
  return train(global_model, data, cfg, Direction::kAscent).params();
}

Direction training_direction(const std::optional<AttackSpec>& attack) {
  if (attack && attack->kind == AttackKind::kGradientAscent) return Direction::kAscent;
  return Direction::kDescent;
}

WeightVector apply_post_training(const std::optional<AttackSpec>& attack,
                                 WeightVector trained, Rng& rng) {
  if (!attack) return trained;
  switch (attack->kind) {
    case AttackKind::kSignFlip:
      return apply_sign_flip(trained);
    case AttackKind::kAdditiveNoise:
      return apply_additive_noise(trained, attack->noise_std, rng);
    case AttackKind::kGradientAscent:
      return trained;
  }
  return trained;
}

}  // namespace fedwatch
