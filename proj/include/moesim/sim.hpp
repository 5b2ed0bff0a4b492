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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "moesim/cache.hpp"
#include "moesim/delta.hpp"
#include "moesim/model.hpp"
#include "moesim/routing.hpp"
#include "moesim/trace.hpp"

namespace moesim {

enum class Phase { WholeSequence, GenerationOnly };

/// Per-token cost: fixed compute plus one slow-storage read per miss.
struct LatencyModel {
  double t_compute = 0.02;  // seconds per token
  double t_load = 0.004;    // seconds per expert load

  bool operator==(const LatencyModel&) const = default;
};

struct RunConfig {
  Strategy strategy = Original{};
  std::uint32_t top_j = 0;
  EvictionPolicy policy = EvictionPolicy::Lru;
  std::uint32_t cache_size = 1;  // routed experts per layer
  Phase phase = Phase::WholeSequence;
  std::optional<std::uint64_t> random_init_seed;  // empty cache when unset
  bool renormalize = true;
  IntraBatchOrder intra_batch_order = IntraBatchOrder::HighWeightEvictedFirst;
  std::uint32_t warmup_skip = 0;
  DeltaMode delta_mode;
  LatencyModel latency;

  /// Throws InvalidParam / UnsupportedCombination.
  void validate(const ModelConfig& model) const;
  /// Canonical one-line description; hashed for the reproducibility line.
  std::string describe() const;
};

struct LayerMetrics {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t inactive = 0;
  double miss_rate = 0.0;
  double lifetime_mean = 0.0;
  double lifetime_std = 0.0;
  double retained_mass = 1.0;
  double swap_rate = 0.0;

  bool operator==(const LayerMetrics&) const = default;
};

/// Aggregate results of one run.
///
/// miss_rate divides misses by every slot (K per token and layer, pruned
/// slots included) and hit_rate is its complement. active_hit_rate and
/// active_miss_rate use hits + misses as the denominator.
struct RunMetrics {
  std::uint32_t num_tokens = 0;
  std::uint32_t num_layers = 0;
  std::uint32_t top_k = 0;
  std::uint64_t total_hits = 0;
  std::uint64_t total_misses = 0;
  std::uint64_t total_inactive = 0;
  double miss_rate = 0.0;
  double hit_rate = 1.0;
  double active_miss_rate = 0.0;
  double active_hit_rate = 1.0;
  double steady_miss_rate = 0.0;      // tokens >= warmup_skip
  double prompt_miss_rate = 0.0;      // tokens < prompt_len
  double generation_miss_rate = 0.0;  // tokens >= prompt_len
  double lifetime_mean = 0.0;
  double lifetime_std = 0.0;
  std::uint64_t lifetime_samples = 0;
  std::uint64_t censored_lifetimes = 0;
  double retained_mass = 1.0;  // quality proxy, see README
  double swap_rate = 0.0;
  double est_token_latency = 0.0;
  std::vector<LayerMetrics> per_layer;

  bool operator==(const RunMetrics&) const = default;
};

/// Per-step view passed to a run observer.
struct StepRecord {
  std::uint32_t token;
  std::uint32_t layer;
  bool gated;  // prompt token routed as Original under GenerationOnly
  const Selection& selection;
  const CacheMask& cached_before;
  const AccessOutcome& outcome;
  std::size_t resident_after;
};

using StepObserver = std::function<void(const StepRecord&)>;

/// Simulates \p trace under \p config. Throws ConfigError when the trace
/// does not match \p model and UnsupportedCombination for Belady with a
/// cache-aware strategy.
RunMetrics run(const LogitTrace& trace, const RunConfig& config, const ModelConfig& model,
               const StepObserver& observer = {});

/// t_compute + (total misses / tokens) * t_load.
double estimate_latency(const RunMetrics& metrics, const LatencyModel& latency,
                        const ModelConfig& model);

/// Mean logit range per layer over the whole trace.
std::vector<double> calibrate_delta(const LogitTrace& trace);

/// FNV-1a 64 of \p text.
std::uint64_t fnv1a(std::string_view text);

}  // namespace moesim
