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
#include <span>
#include <vector>

#include "moesim/model.hpp"

namespace moesim {

inline constexpr std::size_t kOptimalMaxBatches = 12;
inline constexpr std::uint32_t kOptimalMaxExperts = 6;
inline constexpr std::uint32_t kOptimalMaxCapacity = 4;

/// Exact minimum miss count over every admissible eviction schedule.
///
/// After each batch the cache may hold any subset of (previous residents and
/// the batch) within capacity that contains the whole batch; a batch larger
/// than the capacity may keep any part of itself. Exhaustive search with
/// memoisation on (batch index, resident set). Throws TooLarge beyond
/// 12 batches, 6 experts or capacity 4.
std::uint64_t brute_force_optimal_misses(std::span<const std::vector<ExpertId>> batches,
                                         std::uint32_t num_experts, std::uint32_t capacity);

}  // namespace moesim
