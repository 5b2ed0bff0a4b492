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

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "moesim/sim.hpp"
#include "moesim/sweep.hpp"

namespace moesim {

/// Fixed-point with \p decimals digits ("%.6f" by default).
std::string format_fixed(double value, int decimals = 6);

struct RunRecord {
  std::string model;
  RunConfig config;
  RunMetrics metrics;
};

/// One row of the lifetime / miss-rate comparison table.
struct ComparisonRow {
  std::string model;
  std::uint32_t cache_size = 0;
  std::uint32_t num_experts = 0;
  std::string routing;
  double lifetime_mean = 0.0;
  double lifetime_std = 0.0;
  double miss_rate = 0.0;  // fraction; emitted as percent
};

std::string run_csv_header();
std::size_t emit_run_csv(std::span<const RunRecord> runs, std::ostream& out);
std::string sweep_csv_header();
std::size_t emit_sweep_csv(const SweepResult& sweep, std::ostream& out);
std::string compare_csv_header();
std::size_t emit_compare_csv(std::span<const ComparisonRow> rows, std::ostream& out);
std::size_t emit_ablation_csv(const AblationTable& table, std::ostream& out);

/// Standalone SVG: retained mass against miss rate, one polyline per sweep
/// through its Pareto points. Throws EmptyReport without points.
std::string emit_svg_tradeoff(std::span<const SweepResult> sweeps,
                              std::span<const std::string> labels);

/// Writes \p content to \p path; IoError names the path.
std::size_t write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace moesim
