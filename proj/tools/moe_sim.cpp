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

// moe-sim: command-line front end for the expert-cache simulator.
//
// Exit codes: 0 success, 1 usage error, 2 data or format error.

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "moesim/error.hpp"
#include "moesim/model.hpp"
#include "moesim/report.hpp"
#include "moesim/routing.hpp"
#include "moesim/sim.hpp"
#include "moesim/sweep.hpp"
#include "moesim/synth.hpp"
#include "moesim/trace.hpp"

namespace fs = std::filesystem;
using namespace moesim;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string preset_list() {
  std::string out;
  for (const auto& p : model_presets()) out += (out.empty() ? "" : ", ") + p.name;
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

LogitTrace load_trace(const fs::path& path) {
  if (path.extension() == ".jsonl") {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    try {
      return read_jsonl(in);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": " + e.what());
    }
  }
  return read_trace(path);
}

std::uint64_t trace_hash(const LogitTrace& trace) {
  const auto bytes = encode_trace(trace);
  return fnv1a({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

void print_repro(const std::string& description, std::uint64_t seed) {
  std::cout << "repro: config_hash=" << hex64(fnv1a(description)) << " seed=" << seed << "\n";
}

std::string describe_model(const ModelConfig& m) {
  std::ostringstream out;
  out << m.name << ": " << m.num_layers << " layers, " << m.num_experts << " routed experts, top-"
      << m.top_k;
  if (m.shared_experts) out << " + " << m.shared_experts << " shared";
  out << ", default J=" << m.default_top_j;
  return out.str();
}

// Options shared by every subcommand that simulates a trace.
struct SimOptions {
  std::string trace_path;
  std::string model_name;
  std::optional<std::uint32_t> top_j;
  std::optional<std::uint32_t> cache_size;
  std::string policy = "lru";
  std::string phase = "all";
  std::string init_cache = "empty";
  std::uint64_t seed = 0;
  std::string delta_mode = "running";
  std::string order = "high-first";
  bool no_renormalize = false;
  bool no_augment = false;
  std::uint32_t warmup = 0;
  double t_compute = LatencyModel{}.t_compute;
  double t_load = LatencyModel{}.t_load;

  void add_to(CLI::App& app) {
    app.add_option("--trace", trace_path, "Trace file (.moet or .jsonl)")->required();
    app.add_option("--model", model_name, "Preset the trace must match (default: inferred)");
    app.add_option("--top-j", top_j, "Experts always kept from the original top-K");
    app.add_option("--cache-size", cache_size, "Routed experts cached per layer (default N/2)");
    app.add_option("--policy", policy, "Eviction policy")
        ->check(CLI::IsMember({"lru", "belady"}))
        ->capture_default_str();
    app.add_option("--phase", phase, "Where cache-aware routing applies")
        ->check(CLI::IsMember({"all", "gen-only"}))
        ->capture_default_str();
    app.add_option("--init-cache", init_cache, "Initial cache contents")
        ->check(CLI::IsMember({"empty", "random"}))
        ->capture_default_str();
    app.add_option("--seed", seed, "Seed for random init and swap-random")->capture_default_str();
    app.add_option("--delta-mode", delta_mode, "running | ema:<decay> | calibrated | exact")
        ->capture_default_str();
    app.add_option("--intra-batch-order", order, "Which same-token insertion leaves first")
        ->check(CLI::IsMember({"high-first", "low-first"}))
        ->capture_default_str();
    app.add_flag("--no-renormalize", no_renormalize, "Keep raw softmax weights as gates");
    app.add_flag("--no-augment-top-j", no_augment, "Cache prior boosts cached experts only");
    app.add_option("--warmup", warmup, "Tokens excluded from the steady-state miss rate")
        ->capture_default_str();
    app.add_option("--t-compute", t_compute, "Latency model: seconds of compute per token")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--t-load", t_load, "Latency model: seconds per expert load")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
  }

  ModelConfig resolve_model(const LogitTrace& trace) const {
    ModelConfig inferred = trace.model();
    if (model_name.empty()) return inferred;
    const auto preset = find_preset(model_name);
    if (!preset) throw UsageError("unknown model '" + model_name + "'; presets: " + preset_list());
    if (!preset->same_shape(inferred))
      throw Error(ErrorCode::ConfigError, "trace shape does not match preset " + model_name);
    return *preset;
  }

  DeltaMode parse_delta(const LogitTrace& trace) const {
    if (delta_mode == "running") return DeltaMode::running_mean();
    if (delta_mode == "exact") return DeltaMode::exact_per_token();
    if (delta_mode == "calibrated") return DeltaMode::calibrated_from(calibrate_delta(trace));
    if (delta_mode.rfind("ema:", 0) == 0) {
      double decay = 0.0;
      try {
        std::size_t used = 0;
        decay = std::stod(delta_mode.substr(4), &used);
        if (used != delta_mode.size() - 4) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw UsageError("--delta-mode ema:<decay> needs a number");
      }
      if (!(decay >= 0.0 && decay <= 1.0)) throw UsageError("EMA decay must lie in [0, 1]");
      return DeltaMode::ema(decay);
    }
    throw UsageError("--delta-mode must be running, ema:<decay>, calibrated or exact");
  }

  RunConfig config(const LogitTrace& trace, const ModelConfig& model) const {
    RunConfig c;
    c.top_j = top_j.value_or(model.default_top_j);
    if (c.top_j > model.top_k) throw UsageError("--top-j must not exceed K=" + std::to_string(model.top_k));
    c.cache_size = cache_size.value_or(std::max(1u, model.num_experts / 2));
    if (c.cache_size < 1 || c.cache_size > model.num_experts)
      throw UsageError("--cache-size must lie in [1, " + std::to_string(model.num_experts) + "]");
    c.policy = policy == "lru" ? EvictionPolicy::Lru : EvictionPolicy::Belady;
    c.phase = phase == "all" ? Phase::WholeSequence : Phase::GenerationOnly;
    if (init_cache == "random") c.random_init_seed = seed;
    c.renormalize = !no_renormalize;
    c.intra_batch_order = order == "high-first" ? IntraBatchOrder::HighWeightEvictedFirst
                                                : IntraBatchOrder::LowWeightEvictedFirst;
    c.warmup_skip = warmup;
    c.delta_mode = parse_delta(trace);
    c.latency = {t_compute, t_load};
    return c;
  }
};

bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

// Builds a strategy from a name and parameter, checking the parameter domain.
Strategy make_strategy(const std::string& name, std::optional<double> param, const ModelConfig& model,
                       std::uint64_t seed, bool augment) {
  const auto need = [&](const char* what) {
    if (!param) throw UsageError("--strategy " + name + " needs --param <" + what + ">");
    return *param;
  };
  const auto integer_in = [&](const char* what, double lo, double hi) {
    const double v = need(what);
    if (!is_integral(v) || v < lo || v > hi)
      throw UsageError(std::string(what) + " for " + name + " must be an integer in [" +
                       fmt("%g", lo) + ", " + fmt("%g", hi) + "]");
    return static_cast<std::uint32_t>(v);
  };
  const auto unit = [&](const char* what) {
    const double v = need(what);
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string(what) + " for " + name + " must lie in [0, 1]");
    return v;
  };
  if (name == "original") {
    if (param) throw UsageError("--strategy original takes no --param");
    return Original{};
  }
  if (name == "prune") return Prune{integer_in("h", 0, model.top_k)};
  if (name == "maxrank") return MaxRank{integer_in("M", 0, model.num_experts)};
  if (name == "cumsum") return Cumsum{unit("p")};
  if (name == "prior") return CachePrior{unit("lambda"), augment, false};
  if (name == "swap-random") {
    if (!param) param = 1.0;
    return SwapRandom{integer_in("k_swap", 1, model.top_k), seed};
  }
  throw UsageError("unknown strategy '" + name + "'");
}

void check_belady(const RunConfig& c) {
  if (c.policy == EvictionPolicy::Belady && is_cache_aware(c.strategy))
    throw Error(ErrorCode::UnsupportedCombination,
                "belady needs the future routing stream, but " + strategy_name(c.strategy) +
                    " routing depends on the cache it would be evicting from; use lru, or "
                    "original/prune routing with belady");
}

unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// --jobs wins; otherwise MOE_SIM_JOBS, which must be a positive integer.
void resolve_jobs(const CLI::App& cmd, unsigned& jobs) {
  if (cmd.count("--jobs")) return;
  const char* env = std::getenv("MOE_SIM_JOBS");
  if (!env || !*env) return;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0 || v > 4096 || env[0] == '-')
    throw UsageError("MOE_SIM_JOBS must be a positive integer, got '" + std::string(env) + "'");
  jobs = static_cast<unsigned>(v);
}

void write_csv(const std::string& path, const std::string& csv) {
  if (path.empty()) return;
  write_text_file(path, csv);
  std::cout << "wrote " << path << "\n";
}

void print_summary(const ModelConfig& model, const RunConfig& c, const RunMetrics& m) {
  std::cout << "strategy " << strategy_name(c.strategy) << " param "
            << fmt("%g", strategy_param(c.strategy)) << ", top-j " << c.top_j << ", cache "
            << c.cache_size << " / " << model.num_experts << ", policy "
            << (c.policy == EvictionPolicy::Lru ? "lru" : "belady") << "\n";
  std::cout << "miss rate " << fmt("%.2f%%", 100 * m.miss_rate) << " (hits " << m.total_hits
            << ", misses " << m.total_misses;
  if (m.total_inactive) std::cout << ", pruned slots " << m.total_inactive;
  std::cout << ")\n";
  std::cout << "lifetime " << fmt("%.2f", m.lifetime_mean) << " +- " << fmt("%.2f", m.lifetime_std)
            << " tokens over " << m.lifetime_samples << " evictions (" << m.censored_lifetimes
            << " still resident)\n";
  std::cout << "retained mass (quality proxy) " << fmt("%.6f", m.retained_mass) << ", swap rate "
            << fmt("%.6f", m.swap_rate) << "\n";
  std::cout << "est. token latency " << fmt("%.6f", m.est_token_latency) << " s\n";
}

// --- gen -------------------------------------------------------------------

struct GenOptions {
  std::string model = "mixtral-8x7b";
  std::uint32_t layers = 0, experts = 0, top_k = 0, shared = 0;
  std::uint32_t tokens = kDefaultContextLength;
  std::uint32_t prompt_len = 0;
  SynthParams synth;
  std::string out;
};

int cmd_gen(const GenOptions& o) {
  ModelConfig model;
  if (o.model == "custom") {
    if (!o.layers || !o.experts || !o.top_k)
      throw UsageError("--model custom needs --layers, --experts and --top-k");
    model = {"custom", o.layers, o.experts, o.top_k, o.shared, std::min(1u, o.top_k)};
  } else {
    const auto preset = find_preset(o.model);
    if (!preset) throw UsageError("unknown model '" + o.model + "'; presets: " + preset_list() + ", custom");
    model = *preset;
  }
  if (o.tokens == 0) throw UsageError("--tokens must be >= 1");
  if (o.prompt_len > o.tokens) throw UsageError("--prompt-len must not exceed --tokens");

  const LogitTrace trace = generate_synthetic(model, o.tokens, o.synth, o.prompt_len);
  std::size_t bytes;
  if (fs::path(o.out).extension() == ".jsonl") {
    std::ostringstream text;
    write_jsonl(trace, text);
    bytes = write_text_file(o.out, text.str());
  } else {
    bytes = write_trace(trace, o.out);
  }
  const auto& h = trace.header();
  std::cout << "wrote " << o.out << " (" << bytes << " bytes)\n"
            << "layers " << h.num_layers << ", experts " << h.num_experts << ", top_k " << h.top_k
            << ", shared " << h.shared_experts << ", tokens " << h.num_tokens << ", prompt_len "
            << h.prompt_len << "\n";
  std::ostringstream desc;
  desc << "gen model=" << model.name << " L=" << model.num_layers << " N=" << model.num_experts
       << " K=" << model.top_k << " S=" << model.shared_experts << " tokens=" << o.tokens
       << " prompt=" << o.prompt_len << " locality=" << fmt("%.17g", o.synth.locality)
       << " hot=" << fmt("%.17g", o.synth.hot_fraction) << " scale=" << fmt("%.17g", o.synth.logit_scale)
       << " boost=" << fmt("%.17g", o.synth.hot_boost);
  print_repro(desc.str(), o.synth.seed);
  return 0;
}

// --- run -------------------------------------------------------------------

struct RunOptions {
  SimOptions sim;
  std::string strategy = "original";
  std::optional<double> param;
  std::string out;
  std::string svg;
};

int cmd_run(const RunOptions& o) {
  const LogitTrace trace = load_trace(o.sim.trace_path);
  const ModelConfig model = o.sim.resolve_model(trace);
  RunConfig config = o.sim.config(trace, model);
  config.strategy = make_strategy(o.strategy, o.param, model, o.sim.seed, !o.sim.no_augment);
  check_belady(config);

  const RunMetrics metrics = run(trace, config, model);
  std::cout << "trace " << o.sim.trace_path << " (" << describe_model(model) << ", "
            << trace.num_tokens() << " tokens)\n";
  print_summary(model, config, metrics);

  const std::vector<RunRecord> records = {{model.name, config, metrics}};
  std::ostringstream csv;
  emit_run_csv(records, csv);
  write_csv(o.out, csv.str());
  if (!o.svg.empty()) {
    SweepResult single;
    single.points = {SweepPoint{strategy_param(config.strategy), metrics}};
    single.pareto_front = {0};
    const std::vector<SweepResult> sweeps = {single};
    const std::vector<std::string> labels = {strategy_name(config.strategy)};
    write_text_file(o.svg, emit_svg_tradeoff(sweeps, labels));
    std::cout << "wrote " << o.svg << "\n";
  }
  print_repro(config.describe() + " trace=" + hex64(trace_hash(trace)), o.sim.seed);
  return 0;
}

// --- sweep -----------------------------------------------------------------

struct SweepOptions {
  SimOptions sim;
  std::vector<std::string> strategies = {"prior"};
  std::string out;
  std::string svg;
  unsigned jobs = default_jobs();
};

StrategyKind parse_kind(const std::string& name) {
  if (name == "prune") return StrategyKind::Prune;
  if (name == "maxrank") return StrategyKind::MaxRank;
  if (name == "cumsum") return StrategyKind::Cumsum;
  if (name == "prior") return StrategyKind::CachePrior;
  throw UsageError("sweepable strategies are prune, maxrank, cumsum and prior");
}

int cmd_sweep(const SweepOptions& o) {
  const LogitTrace trace = load_trace(o.sim.trace_path);
  const ModelConfig model = o.sim.resolve_model(trace);
  RunConfig base = o.sim.config(trace, model);
  base.strategy = CachePrior{0.0, !o.sim.no_augment, false};

  std::vector<StrategyKind> kinds;
  for (const auto& s : o.strategies) kinds.push_back(parse_kind(s));
  std::vector<SweepResult> results;
  std::string description = base.describe() + " trace=" + hex64(trace_hash(trace));
  for (StrategyKind kind : kinds) {
    RunConfig probe = base;
    probe.strategy = strategy_at(kind, 1.0, CachePrior{0.0, !o.sim.no_augment, false});
    check_belady(probe);
    results.push_back(sweep(trace, model, kind, base, o.jobs));
    description += " sweep=" + to_string(kind);
  }

  std::ostringstream csv;
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::ostringstream one;
    emit_sweep_csv(results[i], one);
    std::string text = one.str();
    if (i > 0) text.erase(0, text.find('\n') + 1);  // single header
    csv << text;
  }
  std::cout << "trace " << o.sim.trace_path << " (" << describe_model(model) << "), cache "
            << base.cache_size << " / " << model.num_experts << "\n";
  for (const auto& r : results) {
    std::cout << to_string(r.kind) << ": " << r.points.size() << " points, Pareto front:\n";
    for (std::size_t i : r.pareto_front) {
      const auto& p = r.points[i];
      std::cout << "  param " << fmt("%-9.6g", p.param) << " miss " << fmt("%6.2f%%", 100 * p.metrics.miss_rate)
                << "  retained mass " << fmt("%.6f", p.metrics.retained_mass) << "\n";
    }
  }
  write_csv(o.out, csv.str());
  if (!o.svg.empty()) {
    std::vector<std::string> labels;
    for (const auto& r : results) labels.push_back(to_string(r.kind));
    write_text_file(o.svg, emit_svg_tradeoff(results, labels));
    std::cout << "wrote " << o.svg << "\n";
  }
  print_repro(description, o.sim.seed);
  return 0;
}

// --- ablate-cache-size -----------------------------------------------------

struct AblateOptions {
  SimOptions sim;
  std::vector<std::uint32_t> sizes;
  std::vector<double> thresholds = {0.99, 0.95, 0.90};
  std::string out;
  unsigned jobs = default_jobs();
};

int cmd_ablate(const AblateOptions& o) {
  const LogitTrace trace = load_trace(o.sim.trace_path);
  const ModelConfig model = o.sim.resolve_model(trace);
  RunConfig base = o.sim.config(trace, model);
  base.strategy = CachePrior{0.0, !o.sim.no_augment, false};

  std::vector<std::uint32_t> sizes = o.sizes;
  if (sizes.empty()) {
    const std::uint32_t n = model.num_experts;
    std::set<std::uint32_t> s = {1, model.top_k, n / 4, n / 2, 3 * n / 4, n};
    s.erase(0);
    sizes.assign(s.begin(), s.end());
  }
  for (auto s : sizes)
    if (s < 1 || s > model.num_experts)
      throw UsageError("--sizes must lie in [1, " + std::to_string(model.num_experts) + "]");
  for (double t : o.thresholds)
    if (!(t >= 0.0 && t <= 1.0)) throw UsageError("--mass-thresholds must lie in [0, 1]");

  const AblationTable table = cache_size_ablation(trace, model, base, sizes, o.thresholds, o.jobs);
  std::ostringstream csv;
  emit_ablation_csv(table, csv);
  std::cout << csv.str();
  write_csv(o.out, csv.str());
  std::string description = base.describe() + " trace=" + hex64(trace_hash(trace)) + " sizes=";
  for (auto s : sizes) description += std::to_string(s) + ",";
  description += " thresholds=";
  for (double t : o.thresholds) description += fmt("%.17g", t) + ",";
  print_repro(description, o.sim.seed);
  return 0;
}

// --- compare ---------------------------------------------------------------

struct CompareOptions {
  SimOptions sim;
  std::vector<std::string> strategies = {"original", "prior@0.5"};
  std::string out;
  unsigned jobs = default_jobs();
};

int cmd_compare(const CompareOptions& o) {
  const LogitTrace trace = load_trace(o.sim.trace_path);
  const ModelConfig model = o.sim.resolve_model(trace);
  const RunConfig base = o.sim.config(trace, model);

  std::vector<RunConfig> configs;
  for (const auto& item : o.strategies) {
    const auto at = item.find('@');
    std::optional<double> param;
    if (at != std::string::npos) {
      try {
        std::size_t used = 0;
        param = std::stod(item.substr(at + 1), &used);
        if (used != item.size() - at - 1) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw UsageError("bad strategy '" + item + "'; expected name or name@param");
      }
    }
    RunConfig c = base;
    c.strategy = make_strategy(item.substr(0, at), param, model, o.sim.seed, !o.sim.no_augment);
    check_belady(c);
    configs.push_back(c);
  }

  std::vector<RunMetrics> metrics(configs.size());
  parallel_for(configs.size(), o.jobs, [&](std::size_t i) { metrics[i] = run(trace, configs[i], model); });

  std::vector<ComparisonRow> rows;
  std::string description = "compare trace=" + hex64(trace_hash(trace));
  for (std::size_t i = 0; i < configs.size(); ++i) {
    rows.push_back({model.name, configs[i].cache_size, model.num_experts, o.strategies[i],
                    metrics[i].lifetime_mean, metrics[i].lifetime_std, metrics[i].miss_rate});
    description += " | " + configs[i].describe();
  }
  std::ostringstream csv;
  emit_compare_csv(rows, csv);
  std::cout << csv.str();
  write_csv(o.out, csv.str());
  print_repro(description, o.sim.seed);
  return 0;
}

// --- stats -----------------------------------------------------------------

int cmd_stats(const std::string& path) {
  const LogitTrace trace = load_trace(path);
  const ModelConfig model = trace.model();
  const auto& h = trace.header();
  std::cout << "trace " << path << "\n"
            << "version " << TraceHeader::kVersion << ", layers " << h.num_layers << ", experts "
            << h.num_experts << ", top_k " << h.top_k << ", shared " << h.shared_experts
            << ", tokens " << h.num_tokens << ", prompt_len " << h.prompt_len << "\n"
            << "model " << model.name << "\n";
  std::cout << "layer  range_mean  range_std  range_min  range_max  top1_agree  top1_chance  topk_jaccard\n";

  double sum_agree = 0.0, sum_chance = 0.0, sum_jaccard = 0.0, sum_range = 0.0;
  const std::uint32_t k = h.top_k;
  for (std::uint32_t l = 0; l < h.num_layers; ++l) {
    double rsum = 0.0, rsq = 0.0, rmin = INFINITY, rmax = -INFINITY;
    std::vector<double> top1_freq(h.num_experts, 0.0);
    std::uint64_t agree = 0;
    double jaccard = 0.0;
    Ranking prev;
    for (std::uint32_t t = 0; t < h.num_tokens; ++t) {
      const Eigen::VectorXd z = trace.logits(t, l).cast<double>();
      const double r = logit_range(z);
      rsum += r;
      rsq += r * r;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      Ranking order = rank(z);
      order.resize(k);
      top1_freq[order[0]] += 1.0;
      if (t > 0) {
        agree += order[0] == prev[0];
        std::set<ExpertId> a(order.begin(), order.end()), b(prev.begin(), prev.end());
        std::size_t common = 0;
        for (ExpertId e : a) common += b.count(e);
        jaccard += static_cast<double>(common) / (2 * k - common);
      }
      prev = std::move(order);
    }
    const double n = h.num_tokens;
    const double mean = rsum / n;
    const double pairs = std::max(1.0, n - 1);
    double chance = 0.0;
    for (double f : top1_freq) chance += (f / n) * (f / n);
    const double agree_rate = agree / pairs;
    const double jac = jaccard / pairs;
    std::cout << fmt("%5.0f", l) << fmt("  %10.4f", mean)
              << fmt("  %9.4f", std::sqrt(std::max(0.0, rsq / n - mean * mean))) << fmt("  %9.4f", rmin)
              << fmt("  %9.4f", rmax) << fmt("  %10.4f", agree_rate) << fmt("  %11.4f", chance)
              << fmt("  %12.4f", jac) << "\n";
    sum_agree += agree_rate;
    sum_chance += chance;
    sum_jaccard += jac;
    sum_range += mean;
  }
  const double layers = h.num_layers;
  std::cout << "mean   " << fmt("%10.4f", sum_range / layers) << "  top1_agree " << fmt("%.4f", sum_agree / layers)
            << "  top1_chance " << fmt("%.4f", sum_chance / layers) << "  topk_jaccard "
            << fmt("%.4f", sum_jaccard / layers) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven simulator for cache-aware MoE expert routing"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic router-logit trace");
  gen_cmd->add_option("--model", gen.model, "Preset (" + preset_list() + ") or custom")->capture_default_str();
  gen_cmd->add_option("--layers", gen.layers, "custom: MoE layers");
  gen_cmd->add_option("--experts", gen.experts, "custom: routed experts per layer");
  gen_cmd->add_option("--top-k", gen.top_k, "custom: experts selected per token");
  gen_cmd->add_option("--shared", gen.shared, "custom: shared experts per layer");
  gen_cmd->add_option("--tokens", gen.tokens, "Trace length")->capture_default_str();
  gen_cmd->add_option("--prompt-len", gen.prompt_len, "Tokens in the prompt phase")->capture_default_str();
  gen_cmd->add_option("--locality", gen.synth.locality, "AR(1) persistence in [0, 1]")->capture_default_str();
  gen_cmd->add_option("--hot-fraction", gen.synth.hot_fraction, "Share of hot experts in (0, 1]")
      ->capture_default_str();
  gen_cmd->add_option("--logit-scale", gen.synth.logit_scale, "Logit scale (> 0)")->capture_default_str();
  gen_cmd->add_option("--hot-boost", gen.synth.hot_boost, "Latent offset of hot experts")->capture_default_str();
  gen_cmd->add_option("--seed", gen.synth.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output path (.moet, or .jsonl)")->required();

  RunOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "Simulate one routing strategy");
  run_opts.sim.add_to(*run_cmd);
  run_cmd->add_option("--strategy", run_opts.strategy, "Routing strategy")
      ->check(CLI::IsMember({"original", "prune", "maxrank", "cumsum", "prior", "swap-random"}))
      ->capture_default_str();
  run_cmd->add_option("--param", run_opts.param, "h | M | p | lambda | k_swap");
  run_cmd->add_option("--out", run_opts.out, "Write run.csv here");
  run_cmd->add_option("--svg", run_opts.svg, "Write a one-point trade-off chart here");

  SweepOptions sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep a strategy's hyperparameter grid");
  sweep_opts.sim.add_to(*sweep_cmd);
  sweep_cmd->add_option("--strategy", sweep_opts.strategies, "prune, maxrank, cumsum, prior (repeatable)")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--out", sweep_opts.out, "Write sweep.csv here");
  sweep_cmd->add_option("--svg", sweep_opts.svg, "Write the trade-off chart here");
  sweep_cmd->add_option("--jobs", sweep_opts.jobs, "Parallel runs (default $MOE_SIM_JOBS, else all cores)")
      ->check(CLI::PositiveNumber);

  AblateOptions ablate;
  auto* ablate_cmd = app.add_subcommand("ablate-cache-size", "Miss rate against cache size");
  ablate.sim.add_to(*ablate_cmd);
  ablate_cmd->add_option("--sizes", ablate.sizes, "Cache sizes (default 1, K, N/4, N/2, 3N/4, N)")
      ->delimiter(',');
  ablate_cmd->add_option("--mass-thresholds", ablate.thresholds, "Retained-mass floors for the prior")
      ->delimiter(',')
      ->capture_default_str();
  ablate_cmd->add_option("--out", ablate.out, "Write the ablation CSV here");
  ablate_cmd->add_option("--jobs", ablate.jobs, "Parallel runs (default $MOE_SIM_JOBS, else all cores)")
      ->check(CLI::PositiveNumber);

  CompareOptions compare;
  auto* compare_cmd = app.add_subcommand("compare", "Lifetime and miss rate for several strategies");
  compare.sim.add_to(*compare_cmd);
  compare_cmd->add_option("--strategies", compare.strategies, "name or name@param, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  compare_cmd->add_option("--out", compare.out, "Write compare.csv here");
  compare_cmd->add_option("--jobs", compare.jobs, "Parallel runs (default $MOE_SIM_JOBS, else all cores)")
      ->check(CLI::PositiveNumber);

  std::string stats_path;
  auto* stats_cmd = app.add_subcommand("stats", "Header, logit ranges and temporal locality of a trace");
  stats_cmd->add_option("--trace", stats_path, "Trace file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    resolve_jobs(*sweep_cmd, sweep_opts.jobs);
    resolve_jobs(*ablate_cmd, ablate.jobs);
    resolve_jobs(*compare_cmd, compare.jobs);
    if (*gen_cmd) return cmd_gen(gen);
    if (*run_cmd) return cmd_run(run_opts);
    if (*sweep_cmd) return cmd_sweep(sweep_opts);
    if (*ablate_cmd) return cmd_ablate(ablate);
    if (*compare_cmd) return cmd_compare(compare);
    if (*stats_cmd) return cmd_stats(stats_path);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidParam ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
