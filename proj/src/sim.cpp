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

#include "moesim/sim.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "moesim/error.hpp"
#include "moesim/synth.hpp"

namespace moesim {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Tally {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t inactive = 0;
  std::uint64_t swaps = 0;
  std::uint64_t steps = 0;
  double mass = 0.0;

  void add(const AccessOutcome& o, std::uint64_t swapped, double retained) {
    hits += o.hits;
    misses += o.misses;
    inactive += o.inactive_slots;
    swaps += swapped;
    mass += retained;
    ++steps;
  }
  std::uint64_t slots() const { return hits + misses + inactive; }
  double miss_rate() const { return slots() == 0 ? 0.0 : static_cast<double>(misses) / slots(); }
};

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
}

double population_std(const std::vector<double>& xs, double mean) {
  if (xs.empty()) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / xs.size());
}

// Probability mass of the K most likely experts.
double top_k_mass(const Eigen::VectorXd& logits, std::uint32_t k) {
  const Eigen::VectorXd probs = softmax(logits);
  const Ranking order = rank(logits);
  double mass = 0.0;
  for (std::uint32_t i = 0; i < k; ++i) mass += probs(order[i]);
  return mass;
}

}  // namespace

void RunConfig::validate(const ModelConfig& model) const {
  if (cache_size == 0) throw Error(ErrorCode::InvalidParam, "cache size must be >= 1");
  if (top_j > model.top_k) throw Error(ErrorCode::InvalidParam, "top_j must not exceed top_k");
  struct Check {
    const ModelConfig& m;
    void operator()(const Original&) const {}
    void operator()(const Prune& s) const {
      if (s.h > m.top_k) throw Error(ErrorCode::InvalidParam, "prune h must lie in [0, K]");
    }
    void operator()(const MaxRank& s) const {
      if (s.max_rank > m.num_experts)
        throw Error(ErrorCode::InvalidParam, "max rank M must lie in [0, N]");
    }
    void operator()(const Cumsum& s) const {
      if (!(s.threshold >= 0.0 && s.threshold <= 1.0))
        throw Error(ErrorCode::InvalidParam, "cumsum threshold p must lie in [0, 1]");
    }
    void operator()(const CachePrior& s) const {
      if (!(s.lambda >= 0.0 && s.lambda <= 1.0))
        throw Error(ErrorCode::InvalidParam, "cache prior lambda must lie in [0, 1]");
    }
    void operator()(const SwapRandom& s) const {
      if (s.rank < 1 || s.rank > m.top_k)
        throw Error(ErrorCode::InvalidParam, "swap rank must lie in [1, K]");
    }
  };
  std::visit(Check{model}, strategy);
  if (policy == EvictionPolicy::Belady && is_cache_aware(strategy))
    throw Error(ErrorCode::UnsupportedCombination,
                "Belady eviction needs the future access stream, but " + strategy_name(strategy) +
                    " routing depends on the cache contents; use original, prune or "
                    "swap-random routing with Belady");
  if (delta_mode.kind == DeltaMode::Kind::Ema &&
      !(delta_mode.ema_decay >= 0.0 && delta_mode.ema_decay <= 1.0))
    throw Error(ErrorCode::InvalidParam, "EMA decay must lie in [0, 1]");
  if (delta_mode.kind == DeltaMode::Kind::Calibrated &&
      delta_mode.calibrated.size() < model.num_layers)
    throw Error(ErrorCode::ConfigError, "calibrated logit ranges missing for some layers");
  if (latency.t_compute < 0.0 || latency.t_load < 0.0)
    throw Error(ErrorCode::InvalidParam, "latency model terms must be >= 0");
}

std::string RunConfig::describe() const {
  std::string out = "strategy=" + strategy_name(strategy) +
                    " param=" + fmt_double(strategy_param(strategy));
  if (const auto* prior = std::get_if<CachePrior>(&strategy)) {
    out += " augment_top_j=" + std::to_string(prior->augment_top_j);
    if (prior->saturating) out += " saturating=1";
  }
  if (const auto* swap = std::get_if<SwapRandom>(&strategy))
    out += " swap_seed=" + std::to_string(swap->seed);
  out += " top_j=" + std::to_string(top_j);
  out += std::string(" policy=") + (policy == EvictionPolicy::Lru ? "lru" : "belady");
  out += " cache=" + std::to_string(cache_size);
  out += std::string(" phase=") + (phase == Phase::WholeSequence ? "all" : "gen-only");
  out += " init=" + (random_init_seed ? "random:" + std::to_string(*random_init_seed) : "empty");
  out += " renorm=" + std::to_string(renormalize);
  out += std::string(" order=") +
         (intra_batch_order == IntraBatchOrder::HighWeightEvictedFirst ? "high-first" : "low-first");
  out += " warmup=" + std::to_string(warmup_skip);
  out += " delta=" + delta_mode.describe();
  for (double c : delta_mode.calibrated) out += ":" + fmt_double(c);
  out += " t_compute=" + fmt_double(latency.t_compute) + " t_load=" + fmt_double(latency.t_load);
  return out;
}

RunMetrics run(const LogitTrace& trace, const RunConfig& config, const ModelConfig& model,
               const StepObserver& observer) {
  model.validate();
  const TraceHeader& h = trace.header();
  if (h.num_experts != model.num_experts || h.top_k != model.top_k ||
      h.shared_experts != model.shared_experts || h.num_layers != model.num_layers)
    throw Error(ErrorCode::ConfigError,
                "trace shape (layers " + std::to_string(h.num_layers) + ", N " +
                    std::to_string(h.num_experts) + ", K " + std::to_string(h.top_k) + ", S " +
                    std::to_string(h.shared_experts) + ") does not match model " + model.name);
  config.validate(model);

  const std::uint32_t layers = h.num_layers;
  const std::uint32_t tokens = h.num_tokens;
  const RoutingOptions opts{model.top_k, config.top_j, config.renormalize};

  std::vector<ExpertCache> caches;
  std::vector<DeltaTracker> trackers;
  caches.reserve(layers);
  trackers.reserve(layers);
  for (std::uint32_t l = 0; l < layers; ++l) {
    caches.emplace_back(model.num_experts, config.cache_size, config.intra_batch_order);
    if (config.random_init_seed) caches.back().fill_random(mix_seed(*config.random_init_seed, l), 0);
    trackers.emplace_back(config.delta_mode, l);
  }

  const auto gated = [&](std::uint32_t t) {
    return config.phase == Phase::GenerationOnly && t < h.prompt_len;
  };
  const Strategy original = Original{};
  const auto route_step = [&](std::uint32_t t, std::uint32_t l, const Eigen::VectorXd& z,
                              const CacheMask& mask) {
    DeltaTracker& tracker = trackers[l];
    const double delta = tracker.estimate_for(z);
    Selection sel = route(gated(t) ? original : config.strategy, z, mask, opts, delta,
                          static_cast<std::uint64_t>(t) * layers + l);
    tracker.observe(z);
    return sel;
  };

  // Belady needs every layer's full access stream up front; it is only
  // admitted for routing that ignores the cache, so decisions can be made
  // before any cache is simulated.
  std::vector<Selection> planned;
  std::vector<FutureUses> futures;
  if (config.policy == EvictionPolicy::Belady) {
    planned.reserve(static_cast<std::size_t>(tokens) * layers);
    futures.assign(layers, FutureUses(model.num_experts));
    const CacheMask empty = CacheMask::Constant(model.num_experts, false);
    for (std::uint32_t t = 0; t < tokens; ++t)
      for (std::uint32_t l = 0; l < layers; ++l) {
        const Eigen::VectorXd z = trace.logits(t, l).cast<double>();
        planned.push_back(route_step(t, l, z, empty));
        futures[l].record(planned.back(), t);
      }
  }

  std::vector<Tally> per_layer(layers);
  Tally total;
  Tally steady;
  Tally prompt;
  Tally generation;
  CacheMask before;

  for (std::uint32_t t = 0; t < tokens; ++t) {
    for (std::uint32_t l = 0; l < layers; ++l) {
      ExpertCache& cache = caches[l];
      const Eigen::VectorXd z = trace.logits(t, l).cast<double>();
      if (observer) before = cache.mask();
      Selection sel;
      AccessOutcome outcome;
      if (config.policy == EvictionPolicy::Belady) {
        sel = std::move(planned[static_cast<std::size_t>(t) * layers + l]);
        outcome = cache.access_batch(sel, t, EvictionPolicy::Belady, &futures[l]);
      } else {
        sel = route_step(t, l, z, cache.mask());
        outcome = cache.access_batch(sel, t, EvictionPolicy::Lru);
      }

      const std::uint64_t deviations =
          static_cast<std::uint64_t>(std::count(sel.swapped.begin(), sel.swapped.end(), true)) +
          sel.inactive_slots;
      const double selected_mass = std::accumulate(sel.probs.begin(), sel.probs.end(), 0.0);
      const double retained =
          deviations == 0 ? 1.0 : std::min(1.0, selected_mass / top_k_mass(z, model.top_k));

      per_layer[l].add(outcome, deviations, retained);
      total.add(outcome, deviations, retained);
      if (t >= config.warmup_skip) steady.add(outcome, deviations, retained);
      (t < h.prompt_len ? prompt : generation).add(outcome, deviations, retained);

      if (observer)
        observer(StepRecord{t, l, gated(t), sel, before, outcome, cache.size()});
    }
  }

  RunMetrics m;
  m.num_tokens = tokens;
  m.num_layers = layers;
  m.top_k = model.top_k;
  m.total_hits = total.hits;
  m.total_misses = total.misses;
  m.total_inactive = total.inactive;
  m.miss_rate = total.miss_rate();
  m.hit_rate = 1.0 - m.miss_rate;
  const std::uint64_t active = total.hits + total.misses;
  m.active_miss_rate = active == 0 ? 0.0 : static_cast<double>(total.misses) / active;
  m.active_hit_rate = 1.0 - m.active_miss_rate;
  m.steady_miss_rate = steady.miss_rate();
  m.prompt_miss_rate = prompt.miss_rate();
  m.generation_miss_rate = generation.miss_rate();
  m.retained_mass = total.steps == 0 ? 1.0 : total.mass / total.steps;
  m.swap_rate = total.slots() == 0 ? 0.0 : static_cast<double>(total.swaps) / total.slots();

  std::vector<double> pooled;
  for (std::uint32_t l = 0; l < layers; ++l) {
    const LifetimeStats life = caches[l].finalize_lifetimes(tokens);
    pooled.insert(pooled.end(), life.samples.begin(), life.samples.end());
    m.censored_lifetimes += life.censored.size();
    const Tally& tl = per_layer[l];
    LayerMetrics lm;
    lm.hits = tl.hits;
    lm.misses = tl.misses;
    lm.inactive = tl.inactive;
    lm.miss_rate = tl.miss_rate();
    lm.lifetime_mean = life.mean;
    lm.lifetime_std = life.stddev;
    lm.retained_mass = tl.steps == 0 ? 1.0 : tl.mass / tl.steps;
    lm.swap_rate = tl.slots() == 0 ? 0.0 : static_cast<double>(tl.swaps) / tl.slots();
    m.per_layer.push_back(lm);
  }
  m.lifetime_samples = pooled.size();
  m.lifetime_mean = mean_of(pooled);
  m.lifetime_std = population_std(pooled, m.lifetime_mean);
  m.est_token_latency = estimate_latency(m, config.latency, model);
  return m;
}

double estimate_latency(const RunMetrics& metrics, const LatencyModel& latency,
                        const ModelConfig& model) {
  if (metrics.num_layers != 0 && metrics.num_layers != model.num_layers)
    throw Error(ErrorCode::ConfigError, "metrics were produced for a different layer count");
  if (metrics.num_tokens == 0) return latency.t_compute;
  const double misses_per_token =
      static_cast<double>(metrics.total_misses) / static_cast<double>(metrics.num_tokens);
  return latency.t_compute + misses_per_token * latency.t_load;
}

std::vector<double> calibrate_delta(const LogitTrace& trace) {
  std::vector<double> ranges(trace.num_layers(), 0.0);
  for (std::uint32_t t = 0; t < trace.num_tokens(); ++t)
    for (std::uint32_t l = 0; l < trace.num_layers(); ++l) {
      const auto z = trace.logits(t, l);
      ranges[l] += static_cast<double>(z.maxCoeff()) - static_cast<double>(z.minCoeff());
    }
  for (double& r : ranges) r /= trace.num_tokens();
  return ranges;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace moesim
