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

#include "moesim/optimal.hpp"

#include <bit>
#include <limits>
#include <string>

#include "moesim/error.hpp"

namespace moesim {

namespace {

struct Search {
  std::vector<std::uint32_t> demand;  // batch bitmasks
  std::uint32_t capacity;
  std::vector<std::vector<std::uint64_t>> memo;

  static constexpr std::uint64_t kUnset = std::numeric_limits<std::uint64_t>::max();

  std::uint64_t best(std::size_t t, std::uint32_t resident) {
    if (t == demand.size()) return 0;
    std::uint64_t& slot = memo[t][resident];
    if (slot != kUnset) return slot;

    const std::uint32_t batch = demand[t];
    const std::uint64_t misses = std::popcount(batch & ~resident);
    const auto batch_size = static_cast<std::uint32_t>(std::popcount(batch));
    std::uint64_t result = kUnset;
    if (batch_size <= capacity) {
      // Keep the whole batch plus any subset of the other residents that fits.
      const std::uint32_t others = resident & ~batch;
      for (std::uint32_t keep = others;; keep = (keep - 1) & others) {
        if (std::popcount(keep) + batch_size <= capacity)
          result = std::min(result, best(t + 1, batch | keep));
        if (keep == 0) break;
      }
    } else {
      for (std::uint32_t keep = batch;; keep = (keep - 1) & batch) {
        if (static_cast<std::uint32_t>(std::popcount(keep)) <= capacity)
          result = std::min(result, best(t + 1, keep));
        if (keep == 0) break;
      }
    }
    slot = misses + result;
    return slot;
  }
};

}  // namespace

std::uint64_t brute_force_optimal_misses(std::span<const std::vector<ExpertId>> batches,
                                         std::uint32_t num_experts, std::uint32_t capacity) {
  if (batches.size() > kOptimalMaxBatches || num_experts > kOptimalMaxExperts ||
      capacity > kOptimalMaxCapacity)
    throw Error(ErrorCode::TooLarge, "exhaustive search limited to " +
                                         std::to_string(kOptimalMaxBatches) + " batches, " +
                                         std::to_string(kOptimalMaxExperts) + " experts, capacity " +
                                         std::to_string(kOptimalMaxCapacity));
  if (capacity == 0) throw Error(ErrorCode::InvalidParam, "capacity must be >= 1");

  Search search;
  search.capacity = capacity;
  for (const auto& batch : batches) {
    std::uint32_t bits = 0;
    for (ExpertId e : batch) {
      if (e >= num_experts)
        throw Error(ErrorCode::InvalidExpert, "expert " + std::to_string(e) + " out of range");
      bits |= 1u << e;
    }
    search.demand.push_back(bits);
  }
  search.memo.assign(batches.size(), std::vector<std::uint64_t>(1u << num_experts, Search::kUnset));
  return search.best(0, 0);
}

}  // namespace moesim
