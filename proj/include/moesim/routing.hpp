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

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "moesim/error.hpp"
#include "moesim/model.hpp"

namespace moesim {

/// Expert indices ordered from highest to lowest score.
using Ranking = std::vector<ExpertId>;

/// Residency bitmask over the N routed experts of one layer.
using CacheMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Numerically stable softmax. Throws InvalidLogits on empty or non-finite input.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.size() == 0) throw Error(ErrorCode::InvalidLogits, "empty logit vector");
  if (!logits.allFinite()) throw Error(ErrorCode::InvalidLogits, "non-finite logit");
  const Scalar peak = logits.maxCoeff();
  Vector<Scalar> out = (logits.array() - peak).exp().matrix();
  out /= out.sum();
  return out;
}

/// Indices sorted by descending score; equal scores keep ascending index order.
template <typename Derived>
Ranking rank(const Eigen::MatrixBase<Derived>& scores) {
  Ranking order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), ExpertId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](ExpertId a, ExpertId b) { return scores(a) > scores(b); });
  return order;
}

/// Moves \p subset (in its given order) to the front of \p all, keeping the
/// relative order of everything else. Throws InvalidSubset if \p subset holds
/// an element missing from \p all or repeats one.
Ranking promote(std::span<const ExpertId> subset, std::span<const ExpertId> all);

/// Two-stage promotion: cached experts among the first \p max_rank entries,
/// then the first \p top_j entries of the original ranking.
Ranking max_rank_reorder(std::span<const ExpertId> ranking, const CacheMask& cached,
                         std::uint32_t max_rank, std::uint32_t top_j);

/// Smallest M whose top-M cumulative probability reaches \p threshold,
/// following the increment-then-add loop. Capped at N.
std::uint32_t cumsum_max_rank(const Eigen::Ref<const Eigen::VectorXd>& weights,
                              std::span<const ExpertId> ranking, double threshold);

/// Range max(z) - min(z) of one logit vector.
double logit_range(const Eigen::Ref<const Eigen::VectorXd>& logits);

// Strategy parameters. Prune with h == 0 is the "no change" sweep sentinel.
struct Original {};
struct Prune {
  std::uint32_t h = 0;
};
struct MaxRank {
  std::uint32_t max_rank = 0;
};
struct Cumsum {
  double threshold = 0.0;
};
struct CachePrior {
  double lambda = 0.0;
  bool augment_top_j = true;
  // Test mode: adds an epsilon on top of lambda * delta so that, with an exact
  // per-token range and lambda = 1, every boosted expert outranks the rest.
  bool saturating = false;
};
struct SwapRandom {
  std::uint32_t rank = 1;  // 1-based rank that gets replaced
  std::uint64_t seed = 0;
};

using Strategy = std::variant<Original, Prune, MaxRank, Cumsum, CachePrior, SwapRandom>;

/// True for strategies whose decision reads the cache state.
bool is_cache_aware(const Strategy& strategy);
std::string strategy_name(const Strategy& strategy);
/// The swept hyperparameter (h, M, p, lambda or swap rank); 0 for Original.
double strategy_param(const Strategy& strategy);

struct RoutingOptions {
  std::uint32_t top_k = 1;
  std::uint32_t top_j = 0;
  bool renormalize = true;
};

/// Outcome of routing one token at one layer.
///
/// `experts` holds the active experts in selection order. Pruned positions are
/// not listed but counted in `inactive_slots`, so experts.size() +
/// inactive_slots == K always.
struct Selection {
  std::vector<ExpertId> experts;
  std::vector<double> probs;         // unmodified router probabilities
  std::vector<double> gate_weights;  // probs, renormalised over the selection if enabled
  std::vector<bool> swapped;         // expert is outside the original top-K
  std::uint32_t inactive_slots = 0;
  bool degenerate = false;  // h = 1 pruning or an empty swap pool

  std::size_t slots() const { return experts.size() + inactive_slots; }
};

Selection route_original(const Eigen::Ref<const Eigen::VectorXd>& logits,
                         const RoutingOptions& opts);

/// Keeps the top (h - 1) experts, 1 <= h <= K.
Selection route_pruned(const Eigen::Ref<const Eigen::VectorXd>& logits,
                       const RoutingOptions& opts, std::uint32_t h);

Selection route_max_rank(const Eigen::Ref<const Eigen::VectorXd>& logits,
                         const CacheMask& cached, const RoutingOptions& opts,
                         std::uint32_t max_rank);

Selection route_cumsum(const Eigen::Ref<const Eigen::VectorXd>& logits,
                       const CacheMask& cached, const RoutingOptions& opts, double threshold);

/// Reranks on z + lambda * delta * mask where mask is the residency bitmask,
/// optionally widened by the original top-J. Gate weights always come from z.
Selection route_cache_prior(const Eigen::Ref<const Eigen::VectorXd>& logits,
                            const CacheMask& cached, const RoutingOptions& opts,
                            const CachePrior& prior, double delta);

/// Replaces the expert at 1-based \p swap_rank with a uniformly drawn expert
/// outside the original top-K. With no candidates the original selection is
/// returned and flagged degenerate.
Selection route_swap_random(const Eigen::Ref<const Eigen::VectorXd>& logits,
                            const RoutingOptions& opts, std::uint32_t swap_rank,
                            std::uint64_t seed);

/// Dispatches on \p strategy. \p delta is the current logit-range estimate
/// (read by CachePrior only); \p stream_key is mixed into the SwapRandom seed so
/// every (token, layer) draws independently.
Selection route(const Strategy& strategy, const Eigen::Ref<const Eigen::VectorXd>& logits,
                const CacheMask& cached, const RoutingOptions& opts, double delta,
                std::uint64_t stream_key = 0);

}  // namespace moesim
