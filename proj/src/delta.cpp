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

#include "moesim/delta.hpp"

#include <cstdio>

#include "moesim/error.hpp"
#include "moesim/routing.hpp"

namespace moesim {

std::string DeltaMode::describe() const {
  switch (kind) {
    case Kind::RunningMean: return "running";
    case Kind::Ema: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "ema:%.17g", ema_decay);
      return buf;
    }
    case Kind::Calibrated: return "calibrated";
    case Kind::ExactPerToken: return "exact";
  }
  return "unknown";
}

DeltaTracker::DeltaTracker(const DeltaMode& mode, std::uint32_t layer)
    : kind_(mode.kind), decay_(mode.ema_decay) {
  if (kind_ == DeltaMode::Kind::Ema && !(decay_ >= 0.0 && decay_ <= 1.0))
    throw Error(ErrorCode::InvalidParam, "EMA decay must lie in [0, 1]");
  if (kind_ == DeltaMode::Kind::Calibrated) {
    if (layer >= mode.calibrated.size())
      throw Error(ErrorCode::ConfigError,
                  "no calibrated logit range for layer " + std::to_string(layer));
    value_ = mode.calibrated[layer];
    if (!(value_ >= 0.0)) throw Error(ErrorCode::InvalidParam, "calibrated range must be >= 0");
  }
}

double DeltaTracker::estimate() const { return value_; }

double DeltaTracker::estimate_for(const Eigen::Ref<const Eigen::VectorXd>& logits) const {
  if (kind_ == DeltaMode::Kind::ExactPerToken) return logit_range(logits);
  return value_;
}

void DeltaTracker::observe(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  observe_range(logit_range(logits));
}

void DeltaTracker::observe_range(double range) {
  ++count_;
  switch (kind_) {
    case DeltaMode::Kind::RunningMean:
      value_ += (range - value_) / static_cast<double>(count_);
      break;
    case DeltaMode::Kind::Ema:
      value_ = count_ == 1 ? range : decay_ * value_ + (1.0 - decay_) * range;
      break;
    case DeltaMode::Kind::Calibrated:
      break;
    case DeltaMode::Kind::ExactPerToken:
      value_ = range;
      break;
  }
}

}  // namespace moesim
