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

#include "moesim/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "moesim/error.hpp"

namespace moesim {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string pct(double fraction) { return format_fixed(100.0 * fraction); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::size_t put(std::ostream& out, const std::string& line) {
  out << line << '\n';
  return line.size() + 1;
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string format_fixed(double value, int decimals) {
  if (std::isnan(value)) return "nan";
  if (value == 0.0) value = 0.0;  // no "-0.000000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

std::string run_csv_header() {
  return "model,strategy,param,top_j,cache_size,policy,phase,init_cache,renormalize,tokens,"
         "layers,top_k,hits,misses,inactive,miss_rate_pct,hit_rate_pct,active_miss_rate_pct,"
         "steady_miss_rate_pct,prompt_miss_rate_pct,generation_miss_rate_pct,lifetime_mean,"
         "lifetime_std,lifetime_samples,censored_lifetimes,retained_mass,swap_rate,"
         "est_token_latency_s,config_hash";
}

std::size_t emit_run_csv(std::span<const RunRecord> runs, std::ostream& out) {
  std::size_t bytes = put(out, run_csv_header());
  for (const auto& r : runs) {
    const RunConfig& c = r.config;
    const RunMetrics& m = r.metrics;
    std::string row = csv_field(r.model);
    row += "," + strategy_name(c.strategy);
    row += "," + format_fixed(strategy_param(c.strategy));
    row += "," + std::to_string(c.top_j);
    row += "," + std::to_string(c.cache_size);
    row += c.policy == EvictionPolicy::Lru ? ",lru" : ",belady";
    row += c.phase == Phase::WholeSequence ? ",all" : ",gen-only";
    row += c.random_init_seed ? ",random" : ",empty";
    row += c.renormalize ? ",1" : ",0";
    row += "," + std::to_string(m.num_tokens);
    row += "," + std::to_string(m.num_layers);
    row += "," + std::to_string(m.top_k);
    row += "," + std::to_string(m.total_hits);
    row += "," + std::to_string(m.total_misses);
    row += "," + std::to_string(m.total_inactive);
    row += "," + pct(m.miss_rate);
    row += "," + pct(m.hit_rate);
    row += "," + pct(m.active_miss_rate);
    row += "," + pct(m.steady_miss_rate);
    row += "," + pct(m.prompt_miss_rate);
    row += "," + pct(m.generation_miss_rate);
    row += "," + format_fixed(m.lifetime_mean);
    row += "," + format_fixed(m.lifetime_std);
    row += "," + std::to_string(m.lifetime_samples);
    row += "," + std::to_string(m.censored_lifetimes);
    row += "," + format_fixed(m.retained_mass);
    row += "," + format_fixed(m.swap_rate);
    row += "," + format_fixed(m.est_token_latency);
    row += "," + hex64(fnv1a(c.describe()));
    bytes += put(out, row);
  }
  return bytes;
}

std::string sweep_csv_header() {
  return "strategy,param,miss_rate_pct,hit_rate_pct,retained_mass,swap_rate,lifetime_mean,"
         "lifetime_std,est_token_latency_s,pareto";
}

std::size_t emit_sweep_csv(const SweepResult& sweep, std::ostream& out) {
  std::size_t bytes = put(out, sweep_csv_header());
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const auto& p = sweep.points[i];
    const bool on_front = std::find(sweep.pareto_front.begin(), sweep.pareto_front.end(), i) !=
                          sweep.pareto_front.end();
    std::string row = to_string(sweep.kind);
    row += "," + format_fixed(p.param);
    row += "," + pct(p.metrics.miss_rate);
    row += "," + pct(p.metrics.hit_rate);
    row += "," + format_fixed(p.metrics.retained_mass);
    row += "," + format_fixed(p.metrics.swap_rate);
    row += "," + format_fixed(p.metrics.lifetime_mean);
    row += "," + format_fixed(p.metrics.lifetime_std);
    row += "," + format_fixed(p.metrics.est_token_latency);
    row += on_front ? ",1" : ",0";
    bytes += put(out, row);
  }
  return bytes;
}

std::string compare_csv_header() {
  return "model,cache_size,routing,lifetime_mean,lifetime_std,miss_rate_pct";
}

std::size_t emit_compare_csv(std::span<const ComparisonRow> rows, std::ostream& out) {
  std::size_t bytes = put(out, compare_csv_header());
  for (const auto& r : rows) {
    std::string row = csv_field(r.model);
    row += "," + std::to_string(r.cache_size) + " / " + std::to_string(r.num_experts);
    row += "," + csv_field(r.routing);
    row += "," + format_fixed(r.lifetime_mean);
    row += "," + format_fixed(r.lifetime_std);
    row += "," + pct(r.miss_rate);
    bytes += put(out, row);
  }
  return bytes;
}

std::size_t emit_ablation_csv(const AblationTable& table, std::ostream& out) {
  std::string header = "cache_size,lru_miss_rate_pct,belady_miss_rate_pct";
  for (double t : table.mass_thresholds) {
    header += ",prior_miss_rate_pct@mass>=" + format_fixed(t);
    header += ",prior_lambda@mass>=" + format_fixed(t);
  }
  std::size_t bytes = put(out, header);
  for (const auto& r : table.rows) {
    std::string row = std::to_string(r.cache_size);
    row += "," + pct(r.lru_miss_rate);
    row += "," + pct(r.belady_miss_rate);
    for (std::size_t i = 0; i < r.prior_miss_rate.size(); ++i) {
      row += "," + pct(r.prior_miss_rate[i]);
      row += "," + format_fixed(r.prior_lambda[i]);
    }
    bytes += put(out, row);
  }
  return bytes;
}

std::string emit_svg_tradeoff(std::span<const SweepResult> sweeps,
                              std::span<const std::string> labels) {
  if (labels.size() != sweeps.size())
    throw Error(ErrorCode::InvalidParam, "one label per sweep required");

  struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (miss %, mass)
  };
  std::vector<Series> series;
  for (std::size_t s = 0; s < sweeps.size(); ++s) {
    const SweepResult& sw = sweeps[s];
    if (sw.points.empty()) continue;
    std::vector<std::size_t> front = sw.pareto_front;
    if (front.empty()) {
      std::vector<std::pair<double, double>> coords;
      for (const auto& p : sw.points) coords.emplace_back(p.metrics.miss_rate, p.metrics.retained_mass);
      front = pareto_front(coords);
    }
    Series out{labels[s], {}};
    for (std::size_t i : front) {
      if (i >= sw.points.size()) throw Error(ErrorCode::InvalidParam, "Pareto index out of range");
      out.points.emplace_back(100.0 * sw.points[i].metrics.miss_rate,
                              sw.points[i].metrics.retained_mass);
    }
    std::stable_sort(out.points.begin(), out.points.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    series.push_back(std::move(out));
  }
  if (series.empty()) throw Error(ErrorCode::EmptyReport, "no sweep points to plot");

  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  const auto widen = [](double& lo, double& hi, double min_span) {
    if (hi - lo < min_span) {
      const double mid = 0.5 * (lo + hi);
      lo = mid - 0.5 * min_span;
      hi = mid + 0.5 * min_span;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  };
  widen(x_min, x_max, 1.0);
  widen(y_min, y_max, 0.01);

  constexpr double kWidth = 640, kHeight = 420;
  constexpr double kLeft = 80, kRight = 170, kTop = 30, kBottom = 60;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  const auto py = [&](double y) { return kTop + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };
  const auto num = [](double v) { return format_fixed(v, 2); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << num(plot_w)
      << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 4.0;
    const double yv = y_min + (y_max - y_min) * i / 4.0;
    svg << "<line x1=\"" << num(px(xv)) << "\" y1=\"" << num(kTop + plot_h) << "\" x2=\""
        << num(px(xv)) << "\" y2=\"" << num(kTop + plot_h + 5) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\">" << format_fixed(xv, 1) << "</text>\n"
        << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py(yv)) << "\" x2=\"" << kLeft
        << "\" y2=\"" << num(py(yv)) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py(yv) + 4)
        << "\" text-anchor=\"end\">" << format_fixed(yv, 3) << "</text>\n";
  }
  svg << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << num(kHeight - 15)
      << "\" text-anchor=\"middle\">Cache miss rate (%)</text>\n"
      << "<text x=\"18\" y=\"" << num(kTop + plot_h / 2) << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 18 " << num(kTop + plot_h / 2)
      << ")\">Retained probability mass (quality proxy)</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    svg << "<g class=\"series\">\n";
    if (series[s].points.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < series[s].points.size(); ++i) {
        if (i) svg << ' ';
        svg << num(px(series[s].points[i].first)) << ',' << num(py(series[s].points[i].second));
      }
      svg << "\"/>\n";
    }
    for (const auto& [x, y] : series[s].points)
      svg << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    svg << "</g>\n";
  }

  svg << "<g class=\"legend\">\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = kTop + 10 + 20.0 * s;
    const double x = kWidth - kRight + 15;
    svg << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 9) << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[s % std::size(kPalette)] << "\"/>\n"
        << "<text x=\"" << num(x + 18) << "\" y=\"" << num(y + 1) << "\">"
        << xml_escape(series[s].label) << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

std::size_t write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
  return content.size();
}

}  // namespace moesim
