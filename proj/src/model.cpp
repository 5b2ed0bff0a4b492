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

#include "moesim/model.hpp"

#include <array>

#include "moesim/error.hpp"

namespace moesim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidLogits: return "InvalidLogits";
    case ErrorCode::InvalidSubset: return "InvalidSubset";
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::InvalidExpert: return "InvalidExpert";
    case ErrorCode::EmptyCache: return "EmptyCache";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::UnsupportedCombination: return "UnsupportedCombination";
    case ErrorCode::EmptyReport: return "EmptyReport";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

void ModelConfig::validate() const {
  if (num_layers == 0) throw Error(ErrorCode::ConfigError, "num_layers must be >= 1");
  if (num_experts == 0) throw Error(ErrorCode::ConfigError, "num_experts must be >= 1");
  if (top_k == 0 || top_k > num_experts)
    throw Error(ErrorCode::ConfigError, "top_k must satisfy 1 <= K <= N");
  if (default_top_j > top_k) throw Error(ErrorCode::ConfigError, "top_j must not exceed top_k");
}

namespace {

// Routed (N, K), shared S and top-J per architecture; layer counts are the
// number of MoE layers in the released checkpoints.
const std::array<ModelConfig, 4> kPresets = {{
    {"mixtral-8x7b", 32, 8, 2, 0, 1},
    {"phi-3.5-moe", 32, 16, 2, 0, 1},
    {"deepseek-v2-lite", 26, 64, 6, 2, 2},
    {"qwen1.5-moe", 24, 60, 4, 4, 2},
}};

}  // namespace

std::span<const ModelConfig> model_presets() { return kPresets; }

std::optional<ModelConfig> find_preset(std::string_view name) {
  for (const auto& preset : kPresets)
    if (preset.name == name) return preset;
  return std::nullopt;
}

std::optional<ModelConfig> match_preset(std::uint32_t num_experts, std::uint32_t top_k,
                                        std::uint32_t shared_experts) {
  for (const auto& preset : kPresets)
    if (preset.num_experts == num_experts && preset.top_k == top_k &&
        preset.shared_experts == shared_experts)
      return preset;
  return std::nullopt;
}

}  // namespace moesim
