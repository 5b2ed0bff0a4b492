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
#include <string>
#include <vector>

#include <Eigen/Core>

namespace moesim {

/// How the per-layer logit range used by the cache prior is estimated.
struct DeltaMode {
  enum class Kind { RunningMean, Ema, Calibrated, ExactPerToken };

  Kind kind = Kind::RunningMean;
  double ema_decay = 0.9;
  std::vector<double> calibrated;  // one constant per layer for Kind::Calibrated

  static DeltaMode running_mean() { return {}; }
  static DeltaMode ema(double decay) { return {Kind::Ema, decay, {}}; }
  static DeltaMode calibrated_from(std::vector<double> per_layer) {
    return {Kind::Calibrated, 0.9, std::move(per_layer)};
  }
  static DeltaMode exact_per_token() { return {Kind::ExactPerToken, 0.9, {}}; }

  std::string describe() const;
};

/// Estimate of the logit range max(z) - min(z) for one layer.
///
/// The estimate is causal: callers read it, route, and then observe the same
/// token. A fresh tracker reports 0, so the first token routes as if the bias
/// were off. ExactPerToken ignores history and reports the range of the
/// logits being routed.
class DeltaTracker {
 public:
  DeltaTracker() = default;
  DeltaTracker(const DeltaMode& mode, std::uint32_t layer);

  double estimate() const;
  double estimate_for(const Eigen::Ref<const Eigen::VectorXd>& logits) const;
  void observe(const Eigen::Ref<const Eigen::VectorXd>& logits);
  void observe_range(double range);

  std::uint64_t observations() const { return count_; }
  DeltaMode::Kind kind() const { return kind_; }

 private:
  DeltaMode::Kind kind_ = DeltaMode::Kind::RunningMean;
  double decay_ = 0.9;
  double value_ = 0.0;
  std::uint64_t count_ = 0;
};

}  // namespace moesim
