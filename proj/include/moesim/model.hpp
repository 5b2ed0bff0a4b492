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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace moesim {

using ExpertId = std::uint32_t;

/// Shape of one MoE architecture. Counts refer to routed experts; shared
/// experts are listed for bookkeeping only and never enter the cache.
struct ModelConfig {
  std::string name;
  std::uint32_t num_layers = 1;
  std::uint32_t num_experts = 1;  // N
  std::uint32_t top_k = 1;        // K
  std::uint32_t shared_experts = 0;
  std::uint32_t default_top_j = 0;  // J

  /// Throws ConfigError unless 1 <= K <= N, J <= K and num_layers >= 1.
  void validate() const;

  bool same_shape(const ModelConfig& other) const {
    return num_experts == other.num_experts && top_k == other.top_k &&
           shared_experts == other.shared_experts;
  }
};

std::span<const ModelConfig> model_presets();

/// Looks up a preset by its CLI name (e.g. "qwen1.5-moe").
std::optional<ModelConfig> find_preset(std::string_view name);

/// Preset whose (N, K, S) matches, if any.
std::optional<ModelConfig> match_preset(std::uint32_t num_experts, std::uint32_t top_k,
                                        std::uint32_t shared_experts);

}  // namespace moesim
