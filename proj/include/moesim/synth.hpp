/*
 * Copyright 2026 The moe-cache-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>

#include "moesim/model.hpp"
#include "moesim/trace.hpp"

namespace moesim {

inline constexpr std::uint32_t kDefaultContextLength = 1024;

struct SynthParams {
  double locality = 0.5;      // AR(1) persistence of the latent preference, [0, 1]
  double hot_fraction = 0.25; // share of experts with an elevated base preference, (0, 1]
  double logit_scale = 2.0;   // > 0
  double hot_boost = 0.5;     // latent offset of hot experts (unit-variance latent)
  std::uint64_t seed = 0;

  /// Throws InvalidParam outside the stated domains.
  void validate() const;
};

/// Per layer, a latent preference vector follows
///   v_t = a * v_{t-1} + sqrt(1 - a^2) * eps_t,  eps_t ~ N(0, I),  v_0 = eps_0,
/// so every locality keeps a unit-variance latent. Logits are
/// logit_scale * (v_t + hot_boost * hot). Deterministic per seed.
LogitTrace generate_synthetic(const ModelConfig& model, std::uint32_t tokens,
                              const SynthParams& params, std::uint32_t prompt_len = 0);

/// SplitMix64 finaliser; used to derive independent per-stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace moesim
