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
#include <string>
#include <utility>
#include <vector>

#include "moesim/sim.hpp"

namespace moesim {

enum class StrategyKind { Prune, MaxRank, Cumsum, CachePrior };

std::string to_string(StrategyKind kind);

/// Prune / MaxRank: {0, 1, ..., K}. Cumsum / CachePrior: 50 equidistant
/// points in [0, 1].
std::vector<double> sweep_grid(StrategyKind kind, const ModelConfig& model);

/// Strategy at one grid value. Prune 0 maps to Original routing.
Strategy strategy_at(StrategyKind kind, double param, const CachePrior& prior_template = {});

struct SweepPoint {
  double param = 0.0;
  RunMetrics metrics;
};

struct SweepResult {
  StrategyKind kind = StrategyKind::CachePrior;
  std::vector<SweepPoint> points;
  std::vector<std::size_t> pareto_front;  // indices into points, sorted by miss rate
};

/// Indices of points not dominated in (low miss rate, high retained mass).
std::vector<std::size_t> pareto_front(std::span<const std::pair<double, double>> miss_and_mass);

/// Runs \p fn(i) for i in [0, count) on up to \p jobs threads.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn);

/// One run per grid value on a copy of \p base; results in grid order.
SweepResult sweep(const LogitTrace& trace, const ModelConfig& model, StrategyKind kind,
                  const RunConfig& base, unsigned jobs = 1);

struct AblationRow {
  std::uint32_t cache_size = 0;
  double lru_miss_rate = 0.0;
  double belady_miss_rate = 0.0;
  // Per retained-mass threshold: lowest miss rate of a cache-prior sweep point
  // meeting it, and the lambda that achieved it.
  std::vector<double> prior_miss_rate;
  std::vector<double> prior_lambda;
};

struct AblationTable {
  std::vector<double> mass_thresholds;
  std::vector<AblationRow> rows;
};

/// For every size: LRU and Belady with Original routing, and a full
/// cache-prior sweep (settings from \p base) summarised per threshold.
AblationTable cache_size_ablation(const LogitTrace& trace, const ModelConfig& model,
                                  const RunConfig& base, std::span<const std::uint32_t> sizes,
                                  std::span<const double> mass_thresholds, unsigned jobs = 1);

}  // namespace moesim
