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

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "moesim/error.hpp"
#include "moesim/report.hpp"
#include "moesim/synth.hpp"

using namespace moesim;
namespace pt = boost::property_tree;

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

SweepPoint point(double param, double miss, double mass) {
  SweepPoint p;
  p.param = param;
  p.metrics.miss_rate = miss;
  p.metrics.hit_rate = 1 - miss;
  p.metrics.retained_mass = mass;
  return p;
}

pt::ptree parse_svg(const std::string& svg) {
  std::istringstream in(svg);
  pt::ptree tree;
  pt::read_xml(in, tree);
  return tree;
}

// Counts elements named \p tag anywhere below \p node.
std::size_t count(const pt::ptree& node, const std::string& tag) {
  std::size_t n = 0;
  for (const auto& [name, child] : node) n += (name == tag) + count(child, tag);
  return n;
}

const pt::ptree* find_class(const pt::ptree& node, const std::string& cls) {
  for (const auto& [name, child] : node) {
    if (name == "g" && child.get<std::string>("<xmlattr>.class", "") == cls) return &child;
    if (const auto* hit = find_class(child, cls)) return hit;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("format_fixed") {
  CHECK(format_fixed(0.35 * 100) == "35.000000");
  CHECK(format_fixed(1.0 / 3.0) == "0.333333");
  CHECK(format_fixed(-0.0) == "0.000000");
  CHECK(format_fixed(2.5, 1) == "2.5");
  CHECK(format_fixed(std::nan("")) == "nan");
}

TEST_CASE("run CSV") {
  RunRecord r;
  r.model = "mixtral-8x7b";
  r.config.cache_size = 4;
  r.config.top_j = 1;
  r.metrics.miss_rate = 0.35;
  r.metrics.hit_rate = 0.65;
  r.metrics.total_misses = 7;
  const std::vector<RunRecord> runs = {r};

  std::ostringstream out;
  const auto bytes = emit_run_csv(runs, out);
  CHECK(bytes == out.str().size());
  const auto rows = lines(out.str());
  REQUIRE(rows.size() == 2);
  const auto header = split(rows[0]);
  const auto fields = split(rows[1]);
  REQUIRE(header.size() == fields.size());
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    REQUIRE(it != header.end());
    return fields[it - header.begin()];
  };
  CHECK(col("miss_rate_pct") == "35.000000");
  CHECK(col("hit_rate_pct") == "65.000000");
  CHECK(col("strategy") == "original");
  CHECK(col("misses") == "7");
  CHECK(col("config_hash").size() == 16);

  std::ostringstream again;
  emit_run_csv(runs, again);
  CHECK(again.str() == out.str());
}

TEST_CASE("sweep CSV") {
  SUBCASE("empty sweep is header only") {
    std::ostringstream out;
    emit_sweep_csv(SweepResult{}, out);
    CHECK(out.str() == sweep_csv_header() + "\n");
  }
  SUBCASE("numeric round trip to printed precision") {
    const auto model = [] {
      auto m = *find_preset("mixtral-8x7b");
      m.num_layers = 2;
      return m;
    }();
    SynthParams p;
    p.seed = 4;
    const auto trace = generate_synthetic(model, 120, p);
    RunConfig base;
    base.top_j = 1;
    base.cache_size = 4;
    const auto result = sweep(trace, model, StrategyKind::CachePrior, base);
    std::ostringstream out;
    emit_sweep_csv(result, out);
    const auto rows = lines(out.str());
    REQUIRE(rows.size() == 51);
    for (std::size_t i = 0; i < result.points.size(); ++i) {
      const auto f = split(rows[i + 1]);
      REQUIRE(f.size() == 10);
      const auto& m = result.points[i].metrics;
      CHECK(f[0] == "prior");
      CHECK(std::abs(std::stod(f[1]) - result.points[i].param) <= 5e-7);
      CHECK(std::abs(std::stod(f[2]) - 100 * m.miss_rate) <= 5e-7);
      CHECK(std::abs(std::stod(f[4]) - m.retained_mass) <= 5e-7);
      CHECK(std::abs(std::stod(f[6]) - m.lifetime_mean) <= 5e-7);
      const bool front = std::find(result.pareto_front.begin(), result.pareto_front.end(), i) !=
                         result.pareto_front.end();
      CHECK(f[9] == (front ? "1" : "0"));
    }
  }
}

TEST_CASE("comparison CSV") {
  std::vector<ComparisonRow> rows = {{"qwen1.5-moe", 30, 60, "original", 26.0, 3.5, 0.35},
                                     {"qwen1.5-moe", 30, 60, "prior@0.5", 58.25, 7.0, 0.16}};
  std::ostringstream out;
  emit_compare_csv(rows, out);
  const auto l = lines(out.str());
  REQUIRE(l.size() == 3);
  CHECK(l[0] == "model,cache_size,routing,lifetime_mean,lifetime_std,miss_rate_pct");
  CHECK(l[1] == "qwen1.5-moe,30 / 60,original,26.000000,3.500000,35.000000");
  CHECK(l[2] == "qwen1.5-moe,30 / 60,prior@0.5,58.250000,7.000000,16.000000");

  rows[0].routing = "a,\"b\"";
  std::ostringstream quoted;
  emit_compare_csv(rows, quoted);
  CHECK(lines(quoted.str())[1].find("\"a,\"\"b\"\"\"") != std::string::npos);
}

TEST_CASE("ablation CSV") {
  AblationTable t;
  t.mass_thresholds = {0.95};
  t.rows.push_back({2, 0.5, 0.25, {0.4}, {0.2}});
  std::ostringstream out;
  emit_ablation_csv(t, out);
  const auto l = lines(out.str());
  REQUIRE(l.size() == 2);
  CHECK(split(l[0]).size() == 5);
  CHECK(l[1] == "2,50.000000,25.000000,40.000000,0.200000");
}

TEST_CASE("SVG trade-off chart") {
  SUBCASE("single point") {
    SweepResult s;
    s.points = {point(0.0, 0.3, 1.0)};
    s.pareto_front = {0};
    const std::vector<SweepResult> sweeps = {s};
    const std::vector<std::string> labels = {"original"};
    const auto tree = parse_svg(emit_svg_tradeoff(sweeps, labels));
    CHECK(count(tree, "circle") == 1);
    CHECK(count(tree, "polyline") == 0);
  }
  SUBCASE("four legend entries") {
    std::vector<SweepResult> sweeps(4);
    for (int i = 0; i < 4; ++i) {
      sweeps[i].points = {point(0, 0.3 - 0.05 * i, 1.0), point(1, 0.1, 0.9)};
      sweeps[i].pareto_front = {1, 0};
    }
    const std::vector<std::string> labels = {"prune", "maxrank", "cumsum", "prior & <co>"};
    const auto tree = parse_svg(emit_svg_tradeoff(sweeps, labels));
    const auto* legend = find_class(tree, "legend");
    REQUIRE(legend);
    CHECK(count(*legend, "text") == 4);
    CHECK(count(tree, "polyline") == 4);
  }
  SUBCASE("polyline sorted by miss rate") {
    SweepResult s;
    s.points = {point(0, 0.5, 1.0), point(1, 0.1, 0.8), point(2, 0.3, 0.9)};
    s.pareto_front = {0, 1, 2};
    const std::vector<SweepResult> sweeps = {s};
    const std::vector<std::string> labels = {"prior"};
    const auto tree = parse_svg(emit_svg_tradeoff(sweeps, labels));
    const auto* series = find_class(tree, "series");
    REQUIRE(series);
    const auto coords = split(series->get<std::string>("polyline.<xmlattr>.points"), ' ');
    REQUIRE(coords.size() == 3);
    double prev_x = -1;
    for (const auto& c : coords) {
      const double x = std::stod(split(c)[0]);
      CHECK(x > prev_x);
      prev_x = x;
    }
  }
  SUBCASE("no points") {
    const std::vector<SweepResult> sweeps = {SweepResult{}};
    const std::vector<std::string> labels = {"x"};
    try {
      emit_svg_tradeoff(sweeps, labels);
      FAIL("expected EmptyReport");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyReport);
    }
    CHECK_THROWS(emit_svg_tradeoff({}, {}));
  }
  SUBCASE("label count mismatch") {
    const std::vector<SweepResult> sweeps = {SweepResult{}};
    CHECK_THROWS_AS(emit_svg_tradeoff(sweeps, {}), Error);
  }
}

TEST_CASE("write_text_file") {
  const auto path = std::filesystem::temp_directory_path() / "moesim_report_test.csv";
  CHECK(write_text_file(path, "a,b\n") == 4);
  CHECK(std::filesystem::file_size(path) == 4);
  std::filesystem::remove(path);
  try {
    write_text_file("/nonexistent/dir/out.csv", "x");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
    CHECK(std::string(e.what()).find("/nonexistent/dir/out.csv") != std::string::npos);
  }
}
