// Copyright 2026 The udadet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "udadet/engine.hpp"
#include "udadet/pipeline.hpp"

namespace udadet {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  bool operator==(const Table&) const = default;
};

/// RFC 4180 style: fields with a comma, quote or newline are quoted.
std::string to_csv(const Table& table);
Table parse_csv(std::string_view text);

/// Coverage as a percentage with two decimals, e.g. 0.98224 -> "98.22%".
std::string format_percent(double fraction);
std::string format_number(double value, int decimals = 4);

/// One row per pipeline result.
Table results_table(const std::vector<PipelineResult>& results);
/// Ablation rows plus a final oracle row.
Table ablation_table(const AblationResult& ablation);

struct Series {
  std::string name;
  std::vector<std::pair<int, double>> points;  // (iteration, value)
};

/// Val mAP@0.5 of a training history, entries without a value skipped.
Series map_series(const std::string& name, const TrainingHistory& history);

/// Minimal SVG line chart; empty string when no series has points.
std::string line_chart_svg(const std::string& title, const std::vector<Series>& series);

/// Writes report.json, tables.csv and one mAP-vs-iteration SVG per row that
/// has history into `dir`. Paths in report.json are relative to `dir`.
void emit_report(const std::vector<PipelineResult>& results, const std::filesystem::path& dir);
void emit_ablation_report(const AblationResult& ablation, const std::filesystem::path& dir);

}  // namespace udadet
