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
#include <limits>
#include <span>
#include <vector>

#include "moesim/routing.hpp"

namespace moesim {

enum class EvictionPolicy { Lru, Belady };

/// Recency placement of experts touched by the same token. The default puts
/// higher-weight experts nearer the LRU end so they leave first.
enum class IntraBatchOrder { HighWeightEvictedFirst, LowWeightEvictedFirst };

struct AccessOutcome {
  std::uint32_t hits = 0;
  std::uint32_t misses = 0;
  std::uint32_t inactive_slots = 0;
  std::vector<ExpertId> evicted;
  std::uint32_t token = 0;

  bool operator==(const AccessOutcome&) const = default;
};

struct LifetimeStats {
  std::vector<double> samples;   // closed by eviction
  std::vector<double> censored;  // still resident at end of run, not in mean
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Sorted future access tokens per expert, used by Belady eviction.
class FutureUses {
 public:
  static constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

  explicit FutureUses(std::uint32_t num_experts) : uses_(num_experts) {}

  /// Tokens must be recorded in non-decreasing order per expert.
  void record(ExpertId expert, std::uint32_t token);
  void record(const Selection& selection, std::uint32_t token);

  /// First recorded use strictly after \p token, or kNever.
  std::uint64_t next_use(ExpertId expert, std::uint32_t token) const;

 private:
  std::vector<std::vector<std::uint32_t>> uses_;
};

/// Bounded expert cache of one MoE layer.
///
/// Residents are kept in recency order, least recent first. Each access
/// batch moves the token's experts to the most-recent end, ordered among
/// themselves per IntraBatchOrder. Misses evict older residents first; a
/// batch larger than the capacity keeps only part of itself.
class ExpertCache {
 public:
  ExpertCache(std::uint32_t num_experts, std::uint32_t capacity,
              IntraBatchOrder order = IntraBatchOrder::HighWeightEvictedFirst);

  /// Throws InvalidExpert for indices >= N (cache untouched), and
  /// InvalidParam when Belady is requested without future uses.
  AccessOutcome access_batch(const Selection& selection, std::uint32_t token,
                             EvictionPolicy policy = EvictionPolicy::Lru,
                             const FutureUses* future = nullptr);

  /// Removes the least-recently-used resident. Throws EmptyCache.
  ExpertId lru_evict(std::uint32_t token);
  /// Removes the resident used farthest in the future (never-used first,
  /// lowest index on ties). Throws EmptyCache.
  ExpertId belady_evict(const FutureUses& future, std::uint32_t token);

  /// Fills the cache with up to capacity distinct experts drawn uniformly.
  void fill_random(std::uint64_t seed, std::uint32_t token = 0);

  std::span<const ExpertId> resident() const { return resident_; }
  const CacheMask& mask() const { return mask_; }
  bool contains(ExpertId expert) const { return expert < mask_.size() && mask_(expert); }
  std::uint32_t capacity() const { return capacity_; }
  std::uint32_t num_experts() const { return static_cast<std::uint32_t>(mask_.size()); }
  std::size_t size() const { return resident_.size(); }

  /// Closed lifetimes so far plus censored residents as of \p final_token.
  LifetimeStats finalize_lifetimes(std::uint32_t final_token) const;

  /// Throws ConfigError if the resident list and bitmask disagree or the
  /// capacity is exceeded.
  void check_invariants() const;

 private:
  void insert_back(ExpertId expert, std::uint32_t token);
  void evict_at(std::size_t pos, std::uint32_t token);
  std::size_t belady_victim(std::size_t first, std::size_t last, const FutureUses& future,
                            std::uint32_t token) const;

  std::uint32_t capacity_;
  IntraBatchOrder order_;
  std::vector<ExpertId> resident_;
  CacheMask mask_;
  std::vector<std::uint32_t> insert_token_;
  std::vector<double> lifetimes_;
};

}  // namespace moesim
