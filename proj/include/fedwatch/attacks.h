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

#ifndef FEDWATCH_ATTACKS_H_
#define FEDWATCH_ATTACKS_H_

#include <optional>
#include <span>
#include <string_view>

#include "fedwatch/nn.h"
#include "fedwatch/rng.h"

namespace fedwatch {

enum class AttackKind { kSignFlip, kAdditiveNoise, kGradientAscent };

std::string_view to_string(AttackKind kind);
// Throws InputError on an unknown name.
AttackKind parse_attack_kind(std::string_view name);

struct AttackSpec {
  AttackKind kind = AttackKind::kSignFlip;
  // Only meaningful for kAdditiveNoise.
  double noise_std = 1.0;

  void validate() const;
  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

// Negates every element of the trained weights (not the delta).
WeightVector apply_sign_flip(std::span<const double> weights);

// weights + N(0, noise_std^2) i.i.d., drawn from `rng`.
WeightVector apply_additive_noise(std::span<const double> weights, double noise_std,
                                  Rng& rng);

// Local training identical to an honest client except every step ascends
// the loss.
WeightVector apply_gradient_ascent(const Network& global_model, const LabeledDataset& data,
                                   const TrainConfig& cfg);

// Direction a client with `attack` trains in.
Direction training_direction(const std::optional<AttackSpec>& attack);

// Post-training hook: the only place an attack touches a finished update.
// Honest clients and gradient-ascent clients pass through unchanged.
WeightVector apply_post_training(const std::optional<AttackSpec>& attack,
                                 WeightVector trained, Rng& rng);

}  // namespace fedwatch

#endif  // FEDWATCH_ATTACKS_H_
