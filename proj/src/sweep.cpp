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

#include "moesim/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "moesim/error.hpp"

namespace moesim {

namespace {

constexpr int kUnitGridPoints = 50;

}  // namespace

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Prune: return "prune";
    case StrategyKind::MaxRank: return "maxrank";
    case StrategyKind::Cumsum: return "cumsum";
    case StrategyKind::CachePrior: return "prior";
  }
  return "unknown";
}

std::vector<double> sweep_grid(StrategyKind kind, const ModelConfig& model) {
  std::vector<double> grid;
  switch (kind) {
    case StrategyKind::Prune:
    case StrategyKind::MaxRank:
      for (std::uint32_t v = 0; v <= model.top_k; ++v) grid.push_back(v);
      break;
    case StrategyKind::Cumsum:
    case StrategyKind::CachePrior:
      for (int i = 0; i < kUnitGridPoints; ++i)
        grid.push_back(static_cast<double>(i) / (kUnitGridPoints - 1));
      break;
  }
  return grid;
}

Strategy strategy_at(StrategyKind kind, double param, const CachePrior& prior_template) {
  switch (kind) {
    case StrategyKind::Prune: return Prune{static_cast<std::uint32_t>(std::lround(param))};
    case StrategyKind::MaxRank: return MaxRank{static_cast<std::uint32_t>(std::lround(param))};
    case StrategyKind::Cumsum: return Cumsum{param};
    case StrategyKind::CachePrior: {
      CachePrior prior = prior_template;
      prior.lambda = param;
      return prior;
    }
  }
  return Original{};
}

std::vector<std::size_t> pareto_front(std::span<const std::pair<double, double>> miss_and_mass) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < miss_and_mass.size(); ++i) {
    const auto [miss_i, mass_i] = miss_and_mass[i];
    bool dominated = false;
    for (std::size_t j = 0; j < miss_and_mass.size() && !dominated; ++j) {
      const auto [miss_j, mass_j] = miss_and_mass[j];
      dominated = miss_j <= miss_i && mass_j >= mass_i && (miss_j < miss_i || mass_j > mass_i);
    }
    if (!dominated) front.push_back(i);
  }
  std::stable_sort(front.begin(), front.end(), [&](std::size_t a, std::size_t b) {
    return miss_and_mass[a].first < miss_and_mass[b].first;
  });
  return front;
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (unsigned w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

SweepResult sweep(const LogitTrace& trace, const ModelConfig& model, StrategyKind kind,
                  const RunConfig& base, unsigned jobs) {
  CachePrior prior_template;
  if (const auto* prior = std::get_if<CachePrior>(&base.strategy)) prior_template = *prior;

  const std::vector<double> grid = sweep_grid(kind, model);
  SweepResult result;
  result.kind = kind;
  result.points.resize(grid.size());
  // Surface configuration errors before spawning work.
  {
    RunConfig probe = base;
    probe.strategy = strategy_at(kind, grid.back(), prior_template);
    probe.validate(model);
  }
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    RunConfig config = base;
    config.strategy = strategy_at(kind, grid[i], prior_template);
    result.points[i] = SweepPoint{grid[i], run(trace, config, model)};
  });

  std::vector<std::pair<double, double>> coords;
  coords.reserve(result.points.size());
  for (const auto& p : result.points) coords.emplace_back(p.metrics.miss_rate, p.metrics.retained_mass);
  result.pareto_front = pareto_front(coords);
  return result;
}

AblationTable cache_size_ablation(const LogitTrace& trace, const ModelConfig& model,
                                  const RunConfig& base, std::span<const std::uint32_t> sizes,
                                  std::span<const double> mass_thresholds, unsigned jobs) {
  for (std::uint32_t size : sizes)
    if (size < 1 || size > model.num_experts)
      throw Error(ErrorCode::InvalidParam, "ablation cache sizes must lie in [1, N]");

  AblationTable table;
  table.mass_thresholds.assign(mass_thresholds.begin(), mass_thresholds.end());
  table.rows.resize(sizes.size());

  RunConfig prior_base = base;
  prior_base.policy = EvictionPolicy::Lru;
  if (!std::holds_alternative<CachePrior>(prior_base.strategy)) prior_base.strategy = CachePrior{};

  parallel_for(sizes.size(), jobs, [&](std::size_t i) {
    AblationRow& row = table.rows[i];
    row.cache_size = sizes[i];

    RunConfig reference = base;
    reference.strategy = Original{};
    reference.cache_size = sizes[i];
    reference.policy = EvictionPolicy::Lru;
    row.lru_miss_rate = run(trace, reference, model).miss_rate;
    reference.policy = EvictionPolicy::Belady;
    row.belady_miss_rate = run(trace, reference, model).miss_rate;

    RunConfig prior = prior_base;
    prior.cache_size = sizes[i];
    const SweepResult swept = sweep(trace, model, StrategyKind::CachePrior, prior, 1);
    for (double threshold : table.mass_thresholds) {
      double best_miss = 1.0;
      double best_lambda = 0.0;
      bool found = false;
      for (const auto& point : swept.points) {
        if (point.metrics.retained_mass < threshold) continue;
        if (!found || point.metrics.miss_rate < best_miss) {
          best_miss = point.metrics.miss_rate;
          best_lambda = point.param;
          found = true;
        }
      }
      row.prior_miss_rate.push_back(found ? best_miss : std::nan(""));
      row.prior_lambda.push_back(found ? best_lambda : std::nan(""));
    }
  });
  return table;
}

}  // namespace moesim
