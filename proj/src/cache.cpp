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

#include "moesim/cache.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace moesim {

void FutureUses::record(ExpertId expert, std::uint32_t token) {
  if (expert >= uses_.size())
    throw Error(ErrorCode::InvalidExpert, "expert " + std::to_string(expert) + " out of range");
  auto& list = uses_[expert];
  if (!list.empty() && list.back() > token)
    throw Error(ErrorCode::InvalidParam, "future uses must be recorded in token order");
  if (list.empty() || list.back() != token) list.push_back(token);
}

void FutureUses::record(const Selection& selection, std::uint32_t token) {
  for (ExpertId e : selection.experts) record(e, token);
}

std::uint64_t FutureUses::next_use(ExpertId expert, std::uint32_t token) const {
  if (expert >= uses_.size()) return kNever;
  const auto& list = uses_[expert];
  auto it = std::upper_bound(list.begin(), list.end(), token);
  return it == list.end() ? kNever : *it;
}

ExpertCache::ExpertCache(std::uint32_t num_experts, std::uint32_t capacity, IntraBatchOrder order)
    : capacity_(capacity),
      order_(order),
      mask_(CacheMask::Constant(num_experts, false)),
      insert_token_(num_experts, 0) {
  if (num_experts == 0) throw Error(ErrorCode::ConfigError, "cache needs at least one expert");
  if (capacity == 0) throw Error(ErrorCode::ConfigError, "cache capacity must be >= 1");
  resident_.reserve(std::min(capacity, num_experts) + 1);
}

AccessOutcome ExpertCache::access_batch(const Selection& selection, std::uint32_t token,
                                        EvictionPolicy policy, const FutureUses* future) {
  if (policy == EvictionPolicy::Belady && future == nullptr)
    throw Error(ErrorCode::InvalidParam, "Belady eviction needs the future access stream");
  const auto& experts = selection.experts;
  for (std::size_t i = 0; i < experts.size(); ++i) {
    if (experts[i] >= num_experts())
      throw Error(ErrorCode::InvalidExpert, "expert " + std::to_string(experts[i]) +
                                                " out of range for " +
                                                std::to_string(num_experts()) + " experts");
    for (std::size_t j = 0; j < i; ++j)
      if (experts[j] == experts[i])
        throw Error(ErrorCode::InvalidExpert,
                    "expert " + std::to_string(experts[i]) + " selected twice");
  }

  AccessOutcome outcome;
  outcome.token = token;
  outcome.inactive_slots = selection.inactive_slots;

  // Order of the batch inside the recency list, least recent first.
  std::vector<std::size_t> idx(experts.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto weight = [&](std::size_t i) {
    return i < selection.probs.size() ? selection.probs[i] : 0.0;
  };
  if (order_ == IntraBatchOrder::HighWeightEvictedFirst)
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return weight(a) > weight(b); });
  else
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return weight(a) < weight(b); });

  std::vector<bool> was_resident(experts.size());
  for (std::size_t i = 0; i < experts.size(); ++i) {
    was_resident[i] = mask_(experts[i]);
    if (was_resident[i])
      ++outcome.hits;
    else
      ++outcome.misses;
  }

  std::erase_if(resident_, [&](ExpertId e) {
    return std::find(experts.begin(), experts.end(), e) != experts.end();
  });

  const auto evict_one = [&](std::size_t count) {
    const std::size_t pos =
        policy == EvictionPolicy::Lru ? 0 : belady_victim(0, count, *future, token);
    outcome.evicted.push_back(resident_[pos]);
    evict_at(pos, token);
  };

  while (!resident_.empty() && resident_.size() + experts.size() > capacity_)
    evict_one(resident_.size());

  for (std::size_t i : idx) {
    if (was_resident[i])
      resident_.push_back(experts[i]);
    else
      insert_back(experts[i], token);
  }

  // Batch larger than the cache: part of it cannot stay.
  while (resident_.size() > capacity_) evict_one(resident_.size());

  return outcome;
}

ExpertId ExpertCache::lru_evict(std::uint32_t token) {
  if (resident_.empty()) throw Error(ErrorCode::EmptyCache, "nothing to evict");
  const ExpertId victim = resident_.front();
  evict_at(0, token);
  return victim;
}

ExpertId ExpertCache::belady_evict(const FutureUses& future, std::uint32_t token) {
  if (resident_.empty()) throw Error(ErrorCode::EmptyCache, "nothing to evict");
  const std::size_t pos = belady_victim(0, resident_.size(), future, token);
  const ExpertId victim = resident_[pos];
  evict_at(pos, token);
  return victim;
}

void ExpertCache::fill_random(std::uint64_t seed, std::uint32_t token) {
  std::vector<ExpertId> pool(num_experts());
  std::iota(pool.begin(), pool.end(), ExpertId{0});
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  for (ExpertId e : pool) {
    if (resident_.size() >= capacity_) break;
    if (!mask_(e)) insert_back(e, token);
  }
}

LifetimeStats ExpertCache::finalize_lifetimes(std::uint32_t final_token) const {
  LifetimeStats stats;
  stats.samples = lifetimes_;
  for (ExpertId e : resident_)
    stats.censored.push_back(static_cast<double>(final_token) - insert_token_[e]);
  if (!stats.samples.empty()) {
    const double n = static_cast<double>(stats.samples.size());
    stats.mean = std::accumulate(stats.samples.begin(), stats.samples.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : stats.samples) ss += (s - stats.mean) * (s - stats.mean);
    stats.stddev = std::sqrt(ss / n);
  }
  return stats;
}

void ExpertCache::check_invariants() const {
  if (resident_.size() > capacity_)
    throw Error(ErrorCode::ConfigError, "cache holds " + std::to_string(resident_.size()) +
                                            " experts, capacity " + std::to_string(capacity_));
  if (static_cast<std::size_t>(mask_.count()) != resident_.size())
    throw Error(ErrorCode::ConfigError, "bitmask and resident list disagree");
  for (ExpertId e : resident_)
    if (!mask_(e)) throw Error(ErrorCode::ConfigError, "resident expert missing from bitmask");
}

void ExpertCache::insert_back(ExpertId expert, std::uint32_t token) {
  resident_.push_back(expert);
  mask_(expert) = true;
  insert_token_[expert] = token;
}

void ExpertCache::evict_at(std::size_t pos, std::uint32_t token) {
  const ExpertId victim = resident_[pos];
  resident_.erase(resident_.begin() + static_cast<std::ptrdiff_t>(pos));
  mask_(victim) = false;
  // An expert loaded and dropped within one token still served that token.
  const double lived = static_cast<double>(token) - insert_token_[victim];
  lifetimes_.push_back(std::max(1.0, lived));
}

std::size_t ExpertCache::belady_victim(std::size_t first, std::size_t last,
                                       const FutureUses& future, std::uint32_t token) const {
  std::size_t best = first;
  std::uint64_t best_next = future.next_use(resident_[first], token);
  for (std::size_t i = first + 1; i < last; ++i) {
    const std::uint64_t next = future.next_use(resident_[i], token);
    if (next > best_next || (next == best_next && resident_[i] < resident_[best])) {
      best = i;
      best_next = next;
    }
  }
  return best;
}

}  // namespace moesim
