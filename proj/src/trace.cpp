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

#include "moesim/trace.hpp"

#include <bit>
#include <cfloat>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <optional>
#include <string>

#include <json.hpp>

#include "moesim/error.hpp"

namespace moesim {

namespace {

[[noreturn]] void format_error(std::size_t offset, const std::string& what) {
  throw Error(ErrorCode::FormatError, what + " (byte offset " + std::to_string(offset) + ")");
}

[[noreturn]] void line_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::FormatError, "line " + std::to_string(line) + ": " + what);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint32_t>(in[at]) | (static_cast<std::uint32_t>(in[at + 1]) << 8) |
         (static_cast<std::uint32_t>(in[at + 2]) << 16) |
         (static_cast<std::uint32_t>(in[at + 3]) << 24);
}

// Shared by both formats; `fail` receives the byte offset of the bad field.
void check_header(const TraceHeader& h, const std::function<void(std::size_t, const std::string&)>& fail) {
  if (h.num_layers == 0) fail(6, "num_layers must be >= 1");
  if (h.num_experts == 0) fail(10, "experts_per_layer must be >= 1");
  if (h.top_k == 0 || h.top_k > h.num_experts) fail(14, "top_k must satisfy 1 <= K <= N");
  if (h.num_tokens == 0) fail(22, "num_tokens must be >= 1");
  if (h.prompt_len > h.num_tokens) fail(26, "prompt_len exceeds num_tokens");
  if (h.dtype != TraceHeader::kFloat32) fail(30, "unsupported dtype tag " + std::to_string(h.dtype));
}

bool value_count(const TraceHeader& h, std::uint64_t& count) {
  std::uint64_t n = 0;
  if (__builtin_mul_overflow(static_cast<std::uint64_t>(h.num_tokens), h.num_layers, &n)) return false;
  if (__builtin_mul_overflow(n, static_cast<std::uint64_t>(h.num_experts), &n)) return false;
  count = n;
  return true;
}

}  // namespace

LogitTrace::LogitTrace(const TraceHeader& header, std::vector<float> logits)
    : header_(header), values_(std::move(logits)) {
  check_header(header_, [](std::size_t at, const std::string& what) { format_error(at, what); });
  std::uint64_t expected = 0;
  if (!value_count(header_, expected) || expected != values_.size())
    throw Error(ErrorCode::FormatError, "trace holds " + std::to_string(values_.size()) +
                                            " logits, header implies " + std::to_string(expected));
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      format_error(TraceHeader::kSize + 4 * i, "non-finite logit");
}

ModelConfig LogitTrace::model() const {
  if (auto preset = match_preset(header_.num_experts, header_.top_k, header_.shared_experts)) {
    preset->num_layers = header_.num_layers;
    return *preset;
  }
  return {"custom", header_.num_layers, header_.num_experts, header_.top_k,
          header_.shared_experts, std::min<std::uint32_t>(1, header_.top_k)};
}

std::vector<std::uint8_t> encode_trace(const LogitTrace& trace) {
  const TraceHeader& h = trace.header();
  std::vector<std::uint8_t> out;
  out.reserve(TraceHeader::kSize + 4 * trace.values().size());
  out.insert(out.end(), std::begin(TraceHeader::kMagic), std::end(TraceHeader::kMagic));
  put_u16(out, TraceHeader::kVersion);
  for (std::uint32_t field : {h.num_layers, h.num_experts, h.top_k, h.shared_experts,
                              h.num_tokens, h.prompt_len})
    put_u32(out, field);
  out.push_back(h.dtype);
  for (float v : trace.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

LogitTrace decode_trace(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) format_error(0, "missing header");
  if (bytes.size() < TraceHeader::kSize)
    format_error(bytes.size(), "truncated header: expected " + std::to_string(TraceHeader::kSize) +
                                   " bytes, got " + std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), TraceHeader::kMagic, 4) != 0) format_error(0, "bad magic");
  if (const auto version = get_u16(bytes, 4); version != TraceHeader::kVersion)
    format_error(4, "unsupported version " + std::to_string(version));

  TraceHeader h;
  h.num_layers = get_u32(bytes, 6);
  h.num_experts = get_u32(bytes, 10);
  h.top_k = get_u32(bytes, 14);
  h.shared_experts = get_u32(bytes, 18);
  h.num_tokens = get_u32(bytes, 22);
  h.prompt_len = get_u32(bytes, 26);
  h.dtype = bytes[30];
  check_header(h, [](std::size_t at, const std::string& what) { format_error(at, what); });

  std::uint64_t count = 0;
  std::uint64_t payload = 0;
  if (!value_count(h, count) || __builtin_mul_overflow(count, std::uint64_t{4}, &payload) ||
      payload > std::numeric_limits<std::uint64_t>::max() - TraceHeader::kSize)
    format_error(6, "header dimensions overflow");
  const std::uint64_t expected = TraceHeader::kSize + payload;
  if (bytes.size() != expected)
    format_error(std::min<std::uint64_t>(bytes.size(), expected),
                 std::string(bytes.size() < expected ? "truncated logits" : "trailing bytes") +
                     ": expected " + std::to_string(expected) + " bytes, got " +
                     std::to_string(bytes.size()));

  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = TraceHeader::kSize + 4 * i;
    values[i] = std::bit_cast<float>(get_u32(bytes, at));
    if (!std::isfinite(values[i])) format_error(at, "non-finite logit");
  }
  return LogitTrace(h, std::move(values));
}

std::size_t write_trace(const LogitTrace& trace, const std::filesystem::path& path) {
  const auto bytes = encode_trace(trace);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
  return bytes.size();
}

LogitTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_trace(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_jsonl(const LogitTrace& trace, std::ostream& out) {
  const TraceHeader& h = trace.header();
  nlohmann::json header = {{"header",
                            {{"version", TraceHeader::kVersion},
                             {"num_layers", h.num_layers},
                             {"experts_per_layer", h.num_experts},
                             {"top_k", h.top_k},
                             {"shared_experts", h.shared_experts},
                             {"num_tokens", h.num_tokens},
                             {"prompt_len", h.prompt_len}}}};
  out << header.dump() << '\n';
  for (std::uint32_t t = 0; t < h.num_tokens; ++t) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::uint32_t l = 0; l < h.num_layers; ++l) {
      nlohmann::json row = nlohmann::json::array();
      for (float v : trace.logits(t, l)) row.push_back(static_cast<double>(v));
      layers.push_back(std::move(row));
    }
    out << nlohmann::json{{"t", t}, {"layers", std::move(layers)}}.dump() << '\n';
  }
}

LogitTrace read_jsonl(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<TraceHeader> header;
  std::vector<float> values;
  std::uint32_t tokens_seen = 0;

  const auto get_u32_field = [&](const nlohmann::json& obj, const char* key) -> std::uint32_t {
    if (!obj.contains(key) || !obj[key].is_number_unsigned())
      line_error(line_no, std::string("header field \"") + key + "\" missing or not unsigned");
    const auto v = obj[key].get<std::uint64_t>();
    if (v > std::numeric_limits<std::uint32_t>::max())
      line_error(line_no, std::string("header field \"") + key + "\" out of range");
    return static_cast<std::uint32_t>(v);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      line_error(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) line_error(line_no, "expected a JSON object");

    if (!header) {
      if (!obj.contains("header") || !obj["header"].is_object())
        line_error(line_no, "first record must be the \"header\" object");
      const auto& hj = obj["header"];
      if (get_u32_field(hj, "version") != TraceHeader::kVersion)
        line_error(line_no, "unsupported version");
      TraceHeader h;
      h.num_layers = get_u32_field(hj, "num_layers");
      h.num_experts = get_u32_field(hj, "experts_per_layer");
      h.top_k = get_u32_field(hj, "top_k");
      h.shared_experts = get_u32_field(hj, "shared_experts");
      h.num_tokens = get_u32_field(hj, "num_tokens");
      h.prompt_len = get_u32_field(hj, "prompt_len");
      check_header(h, [&](std::size_t, const std::string& what) { line_error(line_no, what); });
      std::uint64_t count = 0;
      if (!value_count(h, count)) line_error(line_no, "header dimensions overflow");
      header = h;
      values.reserve(std::min<std::uint64_t>(count, std::uint64_t{1} << 20));
      continue;
    }

    if (!obj.contains("t") || !obj["t"].is_number_unsigned())
      line_error(line_no, "missing token index \"t\"");
    if (obj["t"].get<std::uint64_t>() != tokens_seen)
      line_error(line_no, "expected token index " + std::to_string(tokens_seen));
    if (tokens_seen >= header->num_tokens)
      line_error(line_no, "more token records than the header's " +
                              std::to_string(header->num_tokens));
    if (!obj.contains("layers") || !obj["layers"].is_array())
      line_error(line_no, "missing \"layers\" array");
    const auto& layers = obj["layers"];
    if (layers.size() != header->num_layers)
      line_error(line_no, "layer count " + std::to_string(layers.size()) + " does not match header " +
                              std::to_string(header->num_layers));
    for (const auto& row : layers) {
      if (!row.is_array() || row.size() != header->num_experts)
        line_error(line_no, "each layer needs " + std::to_string(header->num_experts) + " logits");
      for (const auto& v : row) {
        if (!v.is_number()) line_error(line_no, "logit is not a number");
        const double d = v.get<double>();
        if (!std::isfinite(d) || std::fabs(d) > FLT_MAX)
          line_error(line_no, "logit not representable as a finite float");
        values.push_back(static_cast<float>(d));
      }
    }
    ++tokens_seen;
  }
  if (!header) line_error(line_no, "missing header");
  if (tokens_seen != header->num_tokens)
    line_error(line_no, "expected " + std::to_string(header->num_tokens) + " token records, got " +
                            std::to_string(tokens_seen));
  return LogitTrace(*header, std::move(values));
}

}  // namespace moesim
