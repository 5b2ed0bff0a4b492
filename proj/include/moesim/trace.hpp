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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "moesim/model.hpp"

namespace moesim {

/// Fixed 31-byte little-endian header of a .moet trace:
/// magic "MOET" @0, u16 version @4, u32 layers @6, experts @10, top_k @14,
/// shared @18, tokens @22, prompt_len @26, u8 dtype @30, logits from @31.
struct TraceHeader {
  static constexpr char kMagic[4] = {'M', 'O', 'E', 'T'};
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kSize = 31;
  static constexpr std::uint8_t kFloat32 = 0;

  std::uint32_t num_layers = 1;
  std::uint32_t num_experts = 1;
  std::uint32_t top_k = 1;
  std::uint32_t shared_experts = 0;
  std::uint32_t num_tokens = 1;
  std::uint32_t prompt_len = 0;
  std::uint8_t dtype = kFloat32;

  bool operator==(const TraceHeader&) const = default;
};

/// Router logits laid out token-major, layer-second, expert-minor.
class LogitTrace {
 public:
  /// Throws FormatError when sizes disagree with the header, the header is
  /// inconsistent, or a value is not finite.
  LogitTrace(const TraceHeader& header, std::vector<float> logits);

  const TraceHeader& header() const { return header_; }
  std::uint32_t num_tokens() const { return header_.num_tokens; }
  std::uint32_t num_layers() const { return header_.num_layers; }
  std::uint32_t num_experts() const { return header_.num_experts; }

  Eigen::Map<const Eigen::VectorXf> logits(std::uint32_t token, std::uint32_t layer) const {
    return {values_.data() + offset(token, layer), static_cast<Eigen::Index>(header_.num_experts)};
  }

  std::span<const float> values() const { return values_; }

  /// Model shape implied by the header: the matching preset, or "custom".
  ModelConfig model() const;

  bool operator==(const LogitTrace&) const = default;

 private:
  std::size_t offset(std::uint32_t token, std::uint32_t layer) const {
    return (static_cast<std::size_t>(token) * header_.num_layers + layer) * header_.num_experts;
  }

  TraceHeader header_;
  std::vector<float> values_;
};

std::vector<std::uint8_t> encode_trace(const LogitTrace& trace);
/// Throws FormatError (with byte offset) on any malformed input.
LogitTrace decode_trace(std::span<const std::uint8_t> bytes);

std::size_t write_trace(const LogitTrace& trace, const std::filesystem::path& path);
LogitTrace read_trace(const std::filesystem::path& path);

/// First line {"header": {...}}, then one {"t": i, "layers": [[...], ...]}
/// object per token.
void write_jsonl(const LogitTrace& trace, std::ostream& out);
/// Throws FormatError naming the offending line.
LogitTrace read_jsonl(std::istream& in);

}  // namespace moesim
