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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Each criterion also has a wall-clock budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "moesim/cache.hpp"
#include "moesim/error.hpp"
#include "moesim/optimal.hpp"
#include "moesim/routing.hpp"
#include "moesim/sim.hpp"
#include "moesim/sweep.hpp"
#include "moesim/synth.hpp"
#include "moesim/trace.hpp"

using namespace moesim;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("unexpected exception: ") + e.what()};
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (elapsed > budget_s) {
    v.pass = false;
    v.detail += "; over the time budget";
  }
  if (!v.pass) ++failures;
  std::printf("AC%-2d %s  %s  [%.2fs / %.0fs]  %s\n", id, v.pass ? "PASS" : "FAIL", title, elapsed,
              budget_s, v.detail.c_str());
  std::fflush(stdout);
}

ModelConfig preset(const std::string& name, std::uint32_t layers = 0) {
  ModelConfig m = *find_preset(name);
  if (layers) m.num_layers = layers;
  return m;
}

const std::vector<std::string> kPresets = {"mixtral-8x7b", "phi-3.5-moe", "deepseek-v2-lite",
                                           "qwen1.5-moe"};

LogitTrace synth(const ModelConfig& m, std::uint32_t tokens, std::uint64_t seed, double locality,
                 std::uint32_t prompt_len = 0) {
  SynthParams p;
  p.seed = seed;
  p.locality = locality;
  return generate_synthetic(m, tokens, p, prompt_len);
}

Selection batch_of(const std::vector<ExpertId>& experts) {
  Selection s;
  s.experts = experts;
  s.probs.assign(experts.size(), 1.0 / experts.size());
  s.gate_weights = s.probs;
  s.swapped.assign(experts.size(), false);
  return s;
}

std::uint64_t replay(const std::vector<std::vector<ExpertId>>& seq, std::uint32_t n,
                     std::uint32_t c, EvictionPolicy policy) {
  FutureUses future(n);
  for (std::uint32_t t = 0; t < seq.size(); ++t)
    for (ExpertId e : seq[t]) future.record(e, t);
  ExpertCache cache(n, c);
  std::uint64_t misses = 0;
  for (std::uint32_t t = 0; t < seq.size(); ++t)
    misses += cache.access_batch(batch_of(seq[t]), t, policy, &future).misses;
  return misses;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// --- criteria ----------------------------------------------------------------

Verdict max_rank_worked_example() {
  Eigen::VectorXd z(6);
  z << 6, 5, 4, 3, 2, 1;
  CacheMask cached = CacheMask::Constant(6, false);
  cached(2) = cached(3) = cached(5) = true;
  const Ranking ranking = max_rank_reorder(rank(z), cached, 4, 1);
  const Selection sel = route_max_rank(z, cached, RoutingOptions{2, 1, true}, 4);
  const bool ok = ranking == Ranking{0, 2, 3, 1, 4, 5} && sel.experts == std::vector<ExpertId>{0, 2};
  std::string got = "ranking";
  for (auto e : ranking) got += " E" + std::to_string(e + 1);
  got += ", selection";
  for (auto e : sel.experts) got += " E" + std::to_string(e + 1);
  return {ok, got};
}

Verdict identity_anchors() {
  int traces = 0, mismatches = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ModelConfig model = preset(kPresets[seed % 4], 2);
    const auto trace = synth(model, 120, seed, 0.3 + 0.006 * seed);
    RunConfig base;
    base.top_j = model.default_top_j;
    base.cache_size = std::max<std::uint32_t>(1, model.num_experts / (2 + seed % 3));
    std::vector<std::vector<ExpertId>> reference;
    const auto original =
        run(trace, base, model, [&](const StepRecord& r) { reference.push_back(r.selection.experts); });
    for (const Strategy& s : {Strategy{CachePrior{0.0}}, Strategy{Cumsum{0.0}}, Strategy{MaxRank{0}}}) {
      RunConfig config = base;
      config.strategy = s;
      std::size_t step = 0;
      bool same_selections = true;
      const auto metrics = run(trace, config, model, [&](const StepRecord& r) {
        same_selections = same_selections && r.selection.experts == reference[step++];
      });
      if (!same_selections || !(metrics == original)) ++mismatches;
    }
    ++traces;
  }
  return {mismatches == 0, std::to_string(traces) + " traces x 3 strategies, " +
                               std::to_string(mismatches) + " mismatches"};
}

Verdict belady_oracle() {
  std::mt19937_64 rng(2024);
  std::uint64_t instances = 0, equal = 0, belady_le_lru = 0;
  for (std::uint32_t n = 1; n <= 5; ++n)
    for (std::uint32_t k = 1; k <= std::min(2u, n); ++k)
      for (std::uint32_t c = 1; c <= 3; ++c)
        for (std::uint32_t length = 1; length <= 8; ++length)
          for (int rep = 0; rep < 60; ++rep) {
            std::vector<std::vector<ExpertId>> seq;
            std::vector<ExpertId> ids(n);
            for (std::uint32_t t = 0; t < length; ++t) {
              std::iota(ids.begin(), ids.end(), ExpertId{0});
              std::shuffle(ids.begin(), ids.end(), rng);
              seq.emplace_back(ids.begin(), ids.begin() + k);
            }
            const auto belady = replay(seq, n, c, EvictionPolicy::Belady);
            const auto lru = replay(seq, n, c, EvictionPolicy::Lru);
            const auto optimum = brute_force_optimal_misses(seq, n, c);
            ++instances;
            equal += belady == optimum;
            belady_le_lru += belady <= lru;
          }
  const bool exact = equal == instances;
  const bool fallback = belady_le_lru == instances;
  std::string detail = std::to_string(instances) + " instances, Belady == optimum on " +
                       std::to_string(equal) + ", Belady <= LRU on " + std::to_string(belady_le_lru);
  if (!exact) detail += " (fallback criterion applied)";
  return {instances >= 10000 && (exact || fallback), detail};
}

Verdict dominating_bias() {
  std::uint64_t steps = 0, violations = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ModelConfig model = preset(kPresets[seed % 4], 2);
    const auto trace = synth(model, 100, 1000 + seed, 0.5);
    RunConfig config;
    config.top_j = static_cast<std::uint32_t>(seed % (model.top_k + 1));
    config.cache_size = 1 + static_cast<std::uint32_t>(seed % model.num_experts);
    config.strategy = CachePrior{1.0, true, true};
    config.delta_mode = DeltaMode::exact_per_token();
    run(trace, config, model, [&](const StepRecord& r) {
      const Eigen::VectorXd z = trace.logits(r.token, r.layer).cast<double>();
      const Ranking order = rank(z);
      std::set<ExpertId> boosted;
      std::int64_t forced = 0;
      for (std::uint32_t i = 0; i < config.top_j; ++i) {
        boosted.insert(order[i]);
        forced += !r.cached_before[order[i]];
      }
      for (Eigen::Index e = 0; e < r.cached_before.size(); ++e)
        if (r.cached_before[e]) boosted.insert(static_cast<ExpertId>(e));
      const std::int64_t spare = std::int64_t{model.top_k} - static_cast<std::int64_t>(boosted.size());
      ++steps;
      violations += r.outcome.misses > std::max<std::int64_t>(0, spare) + forced;
    });
  }
  return {violations == 0, std::to_string(steps) + " steps over 100 traces, " +
                               std::to_string(violations) + " violations"};
}

Verdict conservation() {
  std::mt19937_64 rng(55);
  int configs = 0, bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const ModelConfig model = preset(kPresets[trial % 4], 1 + trial % 3);
    const auto trace = synth(model, 60, 500 + trial, 0.6, trial % 20);
    RunConfig config;
    config.top_j = static_cast<std::uint32_t>(rng() % (model.top_k + 1));
    config.cache_size = 1 + static_cast<std::uint32_t>(rng() % model.num_experts);
    config.phase = trial % 2 ? Phase::GenerationOnly : Phase::WholeSequence;
    std::uniform_real_distribution<> unit(0, 1);
    switch (trial % 6) {
      case 0: config.strategy = Original{}; break;
      case 1: config.strategy = Prune{static_cast<std::uint32_t>(rng() % (model.top_k + 1))}; break;
      case 2: config.strategy = MaxRank{static_cast<std::uint32_t>(rng() % (model.num_experts + 1))}; break;
      case 3: config.strategy = Cumsum{unit(rng)}; break;
      case 4: config.strategy = CachePrior{unit(rng)}; break;
      case 5: config.strategy = SwapRandom{1 + static_cast<std::uint32_t>(rng() % model.top_k), rng()}; break;
    }
    bool step_ok = true;
    const auto m = run(trace, config, model, [&](const StepRecord& r) {
      step_ok = step_ok && r.outcome.hits + r.outcome.misses + r.outcome.inactive_slots == model.top_k;
    });
    const std::uint64_t slots = std::uint64_t{model.top_k} * model.num_layers * trace.num_tokens();
    const bool ok = step_ok && m.total_hits + m.total_misses + m.total_inactive == slots &&
                    m.miss_rate == static_cast<double>(m.total_misses) / slots &&
                    std::abs(m.hit_rate + m.miss_rate - 1.0) <= 1e-12 &&
                    (m.total_hits + m.total_misses == 0 ||
                     std::abs(m.active_hit_rate + m.active_miss_rate - 1.0) <= 1e-12);
    ++configs;
    bad += !ok;
  }
  return {bad == 0, std::to_string(configs) + " randomized configs, " + std::to_string(bad) + " violations"};
}

Verdict policy_ordering() {
  int pairs = 0, order_violations = 0, capacity_violations = 0;
  for (std::size_t p = 0; p < kPresets.size(); ++p) {
    const ModelConfig model = preset(kPresets[p], 2);
    const auto trace = synth(model, 256, 70 + p, 0.6);
    const std::uint32_t n = model.num_experts;
    std::set<std::uint32_t> sizes = {1, model.top_k, std::max(1u, n / 4), std::max(1u, n / 2), n};
    for (std::uint32_t c : sizes)
      for (std::uint32_t h = 0; h <= model.top_k; ++h) {
        RunConfig config;
        config.cache_size = c;
        config.strategy = h == 0 ? Strategy{Original{}} : Strategy{Prune{h}};
        const auto check = [&](const StepRecord& r) { capacity_violations += r.resident_after > c; };
        const auto lru = run(trace, config, model, check);
        config.policy = EvictionPolicy::Belady;
        const auto belady = run(trace, config, model, check);
        ++pairs;
        order_violations += belady.total_misses > lru.total_misses;
      }
  }
  return {order_violations == 0 && capacity_violations == 0,
          std::to_string(pairs) + " (preset, size, strategy) cells, " + std::to_string(order_violations) +
              " ordering and " + std::to_string(capacity_violations) + " capacity violations"};
}

Verdict direction_check() {
  const ModelConfig model = preset("qwen1.5-moe");
  int wins = 0;
  double miss_o = 0, miss_p = 0, life_o = 0, life_p = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto trace = synth(model, kDefaultContextLength, 9000 + seed, 0.7);
    RunConfig config;
    config.top_j = 2;
    config.cache_size = 30;
    const auto original = run(trace, config, model);
    config.strategy = CachePrior{0.5};
    const auto prior = run(trace, config, model);
    wins += prior.miss_rate < original.miss_rate && prior.lifetime_mean > original.lifetime_mean;
    miss_o += original.miss_rate;
    miss_p += prior.miss_rate;
    life_o += original.lifetime_mean;
    life_p += prior.lifetime_mean;
  }
  return {wins >= 95, std::to_string(wins) + "/100 seeds; mean miss " + fmt("%.1f%%", 100 * miss_o / 100) + " -> " +
                          fmt("%.1f%%", 100 * miss_p / 100) + ", mean lifetime " + fmt("%.1f", life_o / 100) +
                          " -> " + fmt("%.1f", life_p / 100) + " tokens"};
}

bool front_is_exact(const SweepResult& s) {
  std::set<std::size_t> front(s.pareto_front.begin(), s.pareto_front.end());
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < s.points.size(); ++j) {
      const auto& a = s.points[i].metrics;
      const auto& b = s.points[j].metrics;
      dominated = dominated || (b.miss_rate <= a.miss_rate && b.retained_mass >= a.retained_mass &&
                                (b.miss_rate < a.miss_rate || b.retained_mass > a.retained_mass));
    }
    if (dominated == front.count(i)) return false;  // dominated on front, or missing from it
  }
  for (std::size_t k = 1; k < s.pareto_front.size(); ++k)
    if (s.points[s.pareto_front[k - 1]].metrics.miss_rate > s.points[s.pareto_front[k]].metrics.miss_rate)
      return false;
  return true;
}

Verdict sweep_shape() {
  const ModelConfig model = preset("mixtral-8x7b", 4);
  const auto trace = synth(model, 300, 8, 0.6);
  RunConfig base;
  base.top_j = 1;
  base.cache_size = 4;
  const auto prior = sweep(trace, model, StrategyKind::CachePrior, base, 2);
  const auto maxrank = sweep(trace, model, StrategyKind::MaxRank, base, 2);
  const auto cumsum = sweep(trace, model, StrategyKind::Cumsum, base, 2);
  const auto prune = sweep(trace, model, StrategyKind::Prune, base, 2);

  bool grid = prior.points.size() == 50;
  for (std::size_t i = 0; grid && i < 50; ++i)
    grid = prior.points[i].param == static_cast<double>(i) / 49.0;
  grid = grid && prior.points.front().param == 0.0 && prior.points.back().param == 1.0;
  std::vector<double> mr;
  for (const auto& p : maxrank.points) mr.push_back(p.param);
  const bool maxrank_grid = mr == std::vector<double>{0, 1, 2};
  const bool fronts = front_is_exact(prior) && front_is_exact(maxrank) && front_is_exact(cumsum) &&
                      front_is_exact(prune);
  return {grid && maxrank_grid && fronts,
          "prior " + std::to_string(prior.points.size()) + " points over [0, 1], maxrank grid {0,1,2}: " +
              (maxrank_grid ? "yes" : "no") + ", fronts exact: " + (fronts ? "yes" : "no")};
}

LogitTrace random_trace(std::mt19937_64& rng) {
  TraceHeader h;
  h.num_layers = 1 + rng() % 4;
  h.num_experts = 1 + rng() % 16;
  h.top_k = 1 + rng() % h.num_experts;
  h.shared_experts = rng() % 3;
  h.num_tokens = 1 + rng() % 40;
  h.prompt_len = rng() % (h.num_tokens + 1);
  std::vector<float> values(std::size_t{h.num_layers} * h.num_experts * h.num_tokens);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (auto& v : values) {
    do {
      const std::uint32_t b = bits(rng);
      std::memcpy(&v, &b, 4);
    } while (!std::isfinite(v));
  }
  return LogitTrace(h, std::move(values));
}

Verdict format_round_trips() {
  std::mt19937_64 rng(99);
  const auto dir = std::filesystem::temp_directory_path() / "moesim_acceptance";
  std::filesystem::create_directories(dir);
  int round_trip_failures = 0;
  std::vector<LogitTrace> traces;
  for (int i = 0; i < 50; ++i) {
    traces.push_back(random_trace(rng));
    const auto& t = traces.back();
    const auto path = dir / ("rt" + std::to_string(i) + ".moet");
    write_trace(t, path);
    const auto back = read_trace(path);
    std::stringstream text;
    write_jsonl(t, text);
    const auto from_json = read_jsonl(text);
    const auto bitwise = [&](const LogitTrace& o) {
      return o.header() == t.header() &&
             std::memcmp(o.values().data(), t.values().data(), 4 * t.values().size()) == 0;
    };
    round_trip_failures += !bitwise(back) || !bitwise(from_json);
    std::filesystem::remove(path);
  }

  // Mutations chosen so that every mutated file is invalid.
  int mutated = 0, rejected = 0, crashes = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& t = traces[i % traces.size()];
    auto bytes = encode_trace(t);
    const float bad_values[] = {std::nanf(""), INFINITY, -INFINITY};
    switch (i % 8) {
      case 0: bytes.resize(rng() % bytes.size()); break;  // truncate anywhere
      case 1: bytes.resize(rng() % 31); break;             // truncate inside the header
      case 2: bytes.push_back(static_cast<std::uint8_t>(rng())); break;
      case 3: bytes[rng() % 4] ^= 1 + rng() % 255; break;   // magic
      case 4: bytes[4 + rng() % 2] ^= 1 + rng() % 255; break;  // version
      case 5: bytes[30] = 1 + rng() % 255; break;          // dtype
      case 6: {                                             // a size field
        const std::size_t field = std::vector<std::size_t>{6, 10, 22}[rng() % 3];
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + field, 4);
        v = v + 1 + rng() % 1000;
        std::memcpy(bytes.data() + field, &v, 4);
        break;
      }
      case 7: {  // a non-finite logit
        const std::size_t at = 31 + 4 * (rng() % t.values().size());
        std::memcpy(bytes.data() + at, &bad_values[rng() % 3], 4);
        break;
      }
    }
    const auto path = dir / "fuzz.moet";
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    ++mutated;
    try {
      read_trace(path);
    } catch (const Error& e) {
      rejected += e.code() == ErrorCode::FormatError;
    } catch (...) {
      ++crashes;
    }
  }

  // Arbitrary byte flips: decoding may succeed, but must never fail any other way.
  int flips = 0, flip_crashes = 0;
  for (int i = 0; i < 1000; ++i) {
    auto bytes = encode_trace(traces[i % traces.size()]);
    for (int f = 0; f < 4; ++f) bytes[rng() % bytes.size()] ^= 1u << (rng() % 8);
    ++flips;
    try {
      decode_trace(bytes);
    } catch (const Error& e) {
      flip_crashes += e.code() != ErrorCode::FormatError;
    } catch (...) {
      ++flip_crashes;
    }
  }
  std::filesystem::remove_all(dir);
  const bool ok = round_trip_failures == 0 && rejected == mutated && crashes == 0 && flip_crashes == 0;
  return {ok, "50 round trips, " + std::to_string(round_trip_failures) + " failures; " +
                  std::to_string(rejected) + "/" + std::to_string(mutated) +
                  " mutated files rejected with FormatError; " + std::to_string(flips) +
                  " random bit-flip files, " + std::to_string(flip_crashes) + " non-format failures"};
}

double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy * sxy / (sxx * syy);
}

Verdict latency_model() {
  // Hand-built fixtures: (tokens, misses, t_compute, t_load).
  struct Fixture {
    std::uint32_t tokens;
    std::uint64_t misses;
    double tc, tl;
  };
  const Fixture fixtures[] = {{10, 40, 0.01, 0.005}, {1, 0, 0.02, 0.004}, {1024, 12345, 0.02, 0.004},
                              {7, 3, 0.0, 1.0},      {3, 1000, 0.5, 0.0}};
  const ModelConfig model = preset("qwen1.5-moe");
  double worst = 0.0;
  for (const auto& f : fixtures) {
    RunMetrics m;
    m.num_tokens = f.tokens;
    m.total_misses = f.misses;
    const double expected = f.tc + static_cast<double>(f.misses) / f.tokens * f.tl;
    const double got = estimate_latency(m, LatencyModel{f.tc, f.tl}, model);
    worst = std::max(worst, std::abs(got - expected) / std::max(1e-300, std::abs(expected)));
  }
  const bool exact = worst <= 4 * std::numeric_limits<double>::epsilon();

  // Relative throughput against hit rate across a lambda sweep, per cache size,
  // on a four-layer slice of the Qwen shape to stay inside the time budget.
  const ModelConfig slice = preset("qwen1.5-moe", 4);
  const auto trace = synth(slice, kDefaultContextLength, 321, 0.7);
  double worst_r2 = 1.0;
  std::string curves;
  for (std::uint32_t c : {30u, 45u}) {
    std::vector<double> hit, throughput, latency;
    double baseline = 0.0;
    for (double lambda : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9}) {
      RunConfig config;
      config.top_j = 2;
      config.cache_size = c;
      config.strategy = CachePrior{lambda};
      const auto m = run(trace, config, slice);
      if (lambda == 0.0) baseline = m.est_token_latency;
      hit.push_back(m.hit_rate);
      throughput.push_back(baseline / m.est_token_latency);
      latency.push_back(m.est_token_latency);
    }
    const double r2 = r_squared(hit, throughput);
    worst_r2 = std::min(worst_r2, r2);
    curves += " c=" + std::to_string(c) + ": hit " + fmt("%.3f", hit.front()) + "->" + fmt("%.3f", hit.back()) +
              ", throughput x" + fmt("%.3f", throughput.back()) + ", R^2 " + fmt("%.5f", r2) +
              " (latency vs hit R^2 " + fmt("%.6f", r_squared(hit, latency)) + ");";
  }
  return {exact && worst_r2 > 0.999, "fixtures max rel. error " + fmt("%.2e", worst) + ";" + curves};
}

}  // namespace

int main() {
  criterion(1, "max-rank worked example", 1, max_rank_worked_example);
  criterion(2, "zero-strength identity anchors", 10, identity_anchors);
  criterion(3, "Belady vs exhaustive optimum", 120, belady_oracle);
  criterion(4, "saturating prior miss bound", 30, dominating_bias);
  criterion(5, "slot conservation and rate accounting", 30, conservation);
  criterion(6, "Belady <= LRU and capacity", 60, policy_ordering);
  criterion(7, "prior lowers misses, lengthens lifetimes", 120, direction_check);
  criterion(8, "sweep grids and Pareto fronts", 30, sweep_shape);
  criterion(9, "trace round trips and corruption", 60, format_round_trips);
  criterion(10, "latency model and throughput line", 1, latency_model);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
