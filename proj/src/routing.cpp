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

#include "moesim/routing.hpp"

#include <cmath>
#include <random>
#include <string>

#include "moesim/synth.hpp"

namespace moesim {

namespace {

void check_options(const RoutingOptions& opts, Eigen::Index num_experts) {
  if (opts.top_k == 0 || opts.top_k > num_experts)
    throw Error(ErrorCode::InvalidParam, "top_k must satisfy 1 <= K <= N");
  if (opts.top_j > opts.top_k) throw Error(ErrorCode::InvalidParam, "top_j must not exceed top_k");
}

void check_mask(const CacheMask& cached, Eigen::Index num_experts) {
  if (cached.size() != num_experts)
    throw Error(ErrorCode::InvalidParam, "cache mask length " + std::to_string(cached.size()) +
                                             " does not match " + std::to_string(num_experts) +
                                             " experts");
}

// Builds a selection from the first `count` entries of `order`.
Selection make_selection(std::span<const ExpertId> order, std::size_t count,
                         const Eigen::VectorXd& probs, std::span<const ExpertId> original,
                         const RoutingOptions& opts) {
  Selection sel;
  sel.experts.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  sel.inactive_slots = opts.top_k - static_cast<std::uint32_t>(count);
  sel.probs.reserve(count);
  sel.swapped.reserve(count);
  const auto top_k = original.first(opts.top_k);
  double mass = 0.0;
  for (ExpertId e : sel.experts) {
    sel.probs.push_back(probs(e));
    mass += probs(e);
    sel.swapped.push_back(std::find(top_k.begin(), top_k.end(), e) == top_k.end());
  }
  sel.gate_weights = sel.probs;
  if (opts.renormalize && mass > 0.0)
    for (double& w : sel.gate_weights) w /= mass;
  return sel;
}

}  // namespace

Ranking promote(std::span<const ExpertId> subset, std::span<const ExpertId> all) {
  ExpertId bound = 0;
  for (ExpertId e : all) bound = std::max(bound, e + 1);
  std::vector<char> in_all(bound, 0);
  for (ExpertId e : all) in_all[e] = 1;
  std::vector<char> taken(bound, 0);
  Ranking out;
  out.reserve(all.size());
  for (ExpertId e : subset) {
    if (e >= bound || !in_all[e])
      throw Error(ErrorCode::InvalidSubset, "expert " + std::to_string(e) + " is not ranked");
    if (taken[e]) throw Error(ErrorCode::InvalidSubset, "expert " + std::to_string(e) + " repeated");
    taken[e] = 1;
    out.push_back(e);
  }
  for (ExpertId e : all)
    if (!taken[e]) out.push_back(e);
  return out;
}

Ranking max_rank_reorder(std::span<const ExpertId> ranking, const CacheMask& cached,
                         std::uint32_t max_rank, std::uint32_t top_j) {
  if (max_rank > ranking.size()) throw Error(ErrorCode::InvalidParam, "max rank exceeds N");
  if (top_j > ranking.size()) throw Error(ErrorCode::InvalidParam, "top_j exceeds N");
  Ranking candidates;
  for (ExpertId e : ranking.first(max_rank))
    if (e < cached.size() && cached(e)) candidates.push_back(e);
  const Ranking promoted = promote(candidates, ranking);
  return promote(ranking.first(top_j), promoted);
}

std::uint32_t cumsum_max_rank(const Eigen::Ref<const Eigen::VectorXd>& weights,
                              std::span<const ExpertId> ranking, double threshold) {
  double cumulative = 0.0;
  std::uint32_t m = 0;
  while (cumulative < threshold && m < ranking.size()) {
    cumulative += weights(ranking[m]);
    ++m;
  }
  return m;
}

double logit_range(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  if (logits.size() == 0) return 0.0;
  return logits.maxCoeff() - logits.minCoeff();
}

bool is_cache_aware(const Strategy& strategy) {
  return std::holds_alternative<MaxRank>(strategy) || std::holds_alternative<Cumsum>(strategy) ||
         std::holds_alternative<CachePrior>(strategy);
}

std::string strategy_name(const Strategy& strategy) {
  struct Namer {
    std::string operator()(const Original&) const { return "original"; }
    std::string operator()(const Prune&) const { return "prune"; }
    std::string operator()(const MaxRank&) const { return "maxrank"; }
    std::string operator()(const Cumsum&) const { return "cumsum"; }
    std::string operator()(const CachePrior&) const { return "prior"; }
    std::string operator()(const SwapRandom&) const { return "swap-random"; }
  };
  return std::visit(Namer{}, strategy);
}

double strategy_param(const Strategy& strategy) {
  struct Param {
    double operator()(const Original&) const { return 0.0; }
    double operator()(const Prune& s) const { return s.h; }
    double operator()(const MaxRank& s) const { return s.max_rank; }
    double operator()(const Cumsum& s) const { return s.threshold; }
    double operator()(const CachePrior& s) const { return s.lambda; }
    double operator()(const SwapRandom& s) const { return s.rank; }
  };
  return std::visit(Param{}, strategy);
}

Selection route_original(const Eigen::Ref<const Eigen::VectorXd>& logits,
                         const RoutingOptions& opts) {
  const Eigen::VectorXd probs = softmax(logits);
  check_options(opts, logits.size());
  const Ranking order = rank(logits);
  return make_selection(order, opts.top_k, probs, order, opts);
}

Selection route_pruned(const Eigen::Ref<const Eigen::VectorXd>& logits,
                       const RoutingOptions& opts, std::uint32_t h) {
  const Eigen::VectorXd probs = softmax(logits);
  check_options(opts, logits.size());
  if (h < 1 || h > opts.top_k)
    throw Error(ErrorCode::InvalidParam, "prune rank h must satisfy 1 <= h <= K");
  const Ranking order = rank(logits);
  Selection sel = make_selection(order, h - 1, probs, order, opts);
  sel.degenerate = h == 1;
  return sel;
}

Selection route_max_rank(const Eigen::Ref<const Eigen::VectorXd>& logits,
                         const CacheMask& cached, const RoutingOptions& opts,
                         std::uint32_t max_rank) {
  const Eigen::VectorXd probs = softmax(logits);
  check_options(opts, logits.size());
  check_mask(cached, logits.size());
  const Ranking order = rank(logits);
  const Ranking reordered = max_rank_reorder(order, cached, max_rank, opts.top_j);
  return make_selection(reordered, opts.top_k, probs, order, opts);
}

Selection route_cumsum(const Eigen::Ref<const Eigen::VectorXd>& logits,
                       const CacheMask& cached, const RoutingOptions& opts, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw Error(ErrorCode::InvalidParam, "cumsum threshold must lie in [0, 1]");
  const Eigen::VectorXd probs = softmax(logits);
  check_options(opts, logits.size());
  check_mask(cached, logits.size());
  const Ranking order = rank(logits);
  const std::uint32_t max_rank = cumsum_max_rank(probs, order, threshold);
  const Ranking reordered = max_rank_reorder(order, cached, max_rank, opts.top_j);
  return make_selection(reordered, opts.top_k, probs, order, opts);
}

Selection route_cache_prior(const Eigen::Ref<const Eigen::VectorXd>& logits,
                            const CacheMask& cached, const RoutingOptions& opts,
                            const CachePrior& prior, double delta) {
  if (!(prior.lambda >= 0.0 && prior.lambda <= 1.0))
    throw Error(ErrorCode::InvalidParam, "cache prior lambda must lie in [0, 1]");
  if (!(delta >= 0.0) || !std::isfinite(delta))
    throw Error(ErrorCode::InvalidParam, "logit range estimate must be finite and >= 0");
  const Eigen::VectorXd probs = softmax(logits);
  check_options(opts, logits.size());
  check_mask(cached, logits.size());
  const Ranking order = rank(logits);

  CacheMask boosted = cached;
  if (prior.augment_top_j)
    for (std::uint32_t i = 0; i < opts.top_j; ++i) boosted(order[i]) = true;

  double bias = prior.lambda * delta;
  if (prior.saturating) bias += 1e-6 * std::max(1.0, bias);
  const Eigen::VectorXd biased = logits + bias * boosted.cast<double>().matrix();
  const Ranking reranked = rank(biased);
  return make_selection(reranked, opts.top_k, probs, order, opts);
}

Selection route_swap_random(const Eigen::Ref<const Eigen::VectorXd>& logits,
                            const RoutingOptions& opts, std::uint32_t swap_rank,
                            std::uint64_t seed) {
  const Eigen::VectorXd probs = softmax(logits);
  check_options(opts, logits.size());
  if (swap_rank < 1 || swap_rank > opts.top_k)
    throw Error(ErrorCode::InvalidParam, "swap rank must satisfy 1 <= k <= K");
  const Ranking order = rank(logits);
  Ranking chosen(order.begin(), order.begin() + opts.top_k);
  std::vector<ExpertId> pool(order.begin() + opts.top_k, order.end());
  if (pool.empty()) {
    Selection sel = make_selection(chosen, opts.top_k, probs, order, opts);
    sel.degenerate = true;
    return sel;
  }
  std::sort(pool.begin(), pool.end());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  chosen[swap_rank - 1] = pool[pick(rng)];
  return make_selection(chosen, opts.top_k, probs, order, opts);
}

Selection route(const Strategy& strategy, const Eigen::Ref<const Eigen::VectorXd>& logits,
                const CacheMask& cached, const RoutingOptions& opts, double delta,
                std::uint64_t stream_key) {
  struct Dispatch {
    const Eigen::Ref<const Eigen::VectorXd>& z;
    const CacheMask& cached;
    const RoutingOptions& opts;
    double delta;
    std::uint64_t key;

    Selection operator()(const Original&) const { return route_original(z, opts); }
    Selection operator()(const Prune& s) const {
      return s.h == 0 ? route_original(z, opts) : route_pruned(z, opts, s.h);
    }
    Selection operator()(const MaxRank& s) const {
      return route_max_rank(z, cached, opts, s.max_rank);
    }
    Selection operator()(const Cumsum& s) const {
      return route_cumsum(z, cached, opts, s.threshold);
    }
    Selection operator()(const CachePrior& s) const {
      return route_cache_prior(z, cached, opts, s, delta);
    }
    Selection operator()(const SwapRandom& s) const {
      return route_swap_random(z, opts, s.rank, mix_seed(s.seed, key));
    }
  };
  return std::visit(Dispatch{logits, cached, opts, delta, stream_key}, strategy);
}

}  // namespace moesim
