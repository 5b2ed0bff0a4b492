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

#include "moesim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Core>

#include "moesim/error.hpp"

namespace moesim {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SynthParams::validate() const {
  if (!(locality >= 0.0 && locality <= 1.0))
    throw Error(ErrorCode::InvalidParam, "locality must lie in [0, 1]");
  if (!(hot_fraction > 0.0 && hot_fraction <= 1.0))
    throw Error(ErrorCode::InvalidParam, "hot fraction must lie in (0, 1]");
  if (!(logit_scale > 0.0) || !std::isfinite(logit_scale))
    throw Error(ErrorCode::InvalidParam, "logit scale must be positive");
  if (!std::isfinite(hot_boost)) throw Error(ErrorCode::InvalidParam, "hot boost must be finite");
}

LogitTrace generate_synthetic(const ModelConfig& model, std::uint32_t tokens,
                              const SynthParams& params, std::uint32_t prompt_len) {
  model.validate();
  params.validate();
  if (tokens == 0) throw Error(ErrorCode::InvalidParam, "tokens must be >= 1");
  if (prompt_len > tokens) throw Error(ErrorCode::InvalidParam, "prompt length exceeds tokens");

  const std::uint32_t n = model.num_experts;
  const std::uint32_t layers = model.num_layers;
  const double a = params.locality;
  const double innovation = std::sqrt(std::max(0.0, 1.0 - a * a));
  const auto hot_count = std::clamp<std::uint32_t>(
      static_cast<std::uint32_t>(std::lround(params.hot_fraction * n)), 1, n);

  struct LayerState {
    std::mt19937_64 rng;
    std::normal_distribution<double> gauss;
    Eigen::VectorXd latent;
    Eigen::VectorXd offset;
  };
  std::vector<LayerState> state;
  state.reserve(layers);
  for (std::uint32_t l = 0; l < layers; ++l) {
    LayerState s{std::mt19937_64(mix_seed(params.seed, l)), std::normal_distribution<double>(0.0, 1.0),
                 Eigen::VectorXd(n),
                 Eigen::VectorXd::Zero(n)};
    std::vector<ExpertId> ids(n);
    std::iota(ids.begin(), ids.end(), ExpertId{0});
    std::shuffle(ids.begin(), ids.end(), s.rng);
    for (std::uint32_t i = 0; i < hot_count; ++i) s.offset(ids[i]) = params.hot_boost;
    for (std::uint32_t e = 0; e < n; ++e) s.latent(e) = s.gauss(s.rng);
    state.push_back(std::move(s));
  }

  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(tokens) * layers * n);
  for (std::uint32_t t = 0; t < tokens; ++t) {
    for (auto& s : state) {
      if (t > 0)
        for (std::uint32_t e = 0; e < n; ++e)
          s.latent(e) = a * s.latent(e) + innovation * s.gauss(s.rng);
      const Eigen::VectorXd logits = params.logit_scale * (s.latent + s.offset);
      for (std::uint32_t e = 0; e < n; ++e) values.push_back(static_cast<float>(logits(e)));
    }
  }

  TraceHeader header;
  header.num_layers = layers;
  header.num_experts = n;
  header.top_k = model.top_k;
  header.shared_experts = model.shared_experts;
  header.num_tokens = tokens;
  header.prompt_len = prompt_len;
  return LogitTrace(header, std::move(values));
}

}  // namespace moesim
