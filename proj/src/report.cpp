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

#include "udadet/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "udadet/error.hpp"

namespace udadet {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool needs_quotes(const std::string& field) {
  return field.find_first_of(",\"\n\r") != std::string::npos;
}

void write_field(std::ostringstream& out, const std::string& field) {
  if (!needs_quotes(field)) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

void write_line(std::ostringstream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out << ',';
    write_field(out, fields[i]);
  }
  out << '\n';
}

}  // namespace

std::string to_csv(const Table& table) {
  std::ostringstream out;
  write_line(out, table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw InternalError("table row width differs from header");
    write_line(out, row);
  }
  return out.str();
}

Table parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      fields.push_back(std::move(field));
      field.clear();
      lines.push_back(std::move(fields));
      fields.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw DataError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    fields.push_back(std::move(field));
    lines.push_back(std::move(fields));
  }
  Table t;
  if (lines.empty()) return t;
  t.header = std::move(lines.front());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].size() != t.header.size()) {
      throw DataError("CSV line " + std::to_string(i + 1) + " has " + std::to_string(lines[i].size()) +
                      " fields, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(lines[i]));
  }
  return t;
}

std::string format_percent(double fraction) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
  return buf;
}

std::string format_number(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

namespace {

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }
std::string opt_percent(const std::optional<double>& v) { return v ? format_percent(*v) : std::string(); }

const std::vector<std::string> kColumns = {
    "scenario",       "seed",           "img",          "fea",           "out",
    "map50_baseline", "map50_adapted",  "map50_oracle", "coverage",      "map50_voc11_adapted",
    "coverage_voc11", "fd_source_target", "fd_translated_target", "pseudo_kept", "final_params_hash",
    "error"};

std::vector<std::string> result_row(const PipelineResult& r) {
  std::vector<std::string> row = {r.scenario,
                                  std::to_string(r.seed),
                                  r.flags.img ? "1" : "0",
                                  r.flags.fea ? "1" : "0",
                                  r.flags.out ? "1" : "0"};
  if (r.error) {
    row.resize(kColumns.size() - 1);
    row.push_back(*r.error);
    return row;
  }
  row.push_back(opt_number(r.baseline_report.map_allpoint));
  row.push_back(opt_number(r.adapted_report.map_allpoint));
  row.push_back(opt_number(r.oracle_report.map_allpoint));
  row.push_back(opt_percent(r.coverage));
  row.push_back(opt_number(r.adapted_report.map_voc11));
  row.push_back(opt_percent(r.coverage_voc11));
  row.push_back(r.frechet ? format_number(r.frechet->source_target) : "");
  row.push_back(r.frechet ? format_number(r.frechet->translated_target) : "");
  row.push_back(r.pseudo_kept ? std::to_string(*r.pseudo_kept) : "");
  row.push_back(r.final_params_hash);
  row.push_back("");
  return row;
}

}  // namespace

Table results_table(const std::vector<PipelineResult>& results) {
  Table t;
  t.header = kColumns;
  for (const auto& r : results) t.rows.push_back(result_row(r));
  return t;
}

Table ablation_table(const AblationResult& ablation) {
  Table t = results_table(ablation.rows);
  std::vector<std::string> oracle(kColumns.size());
  if (!ablation.rows.empty()) {
    oracle[0] = ablation.rows.front().scenario;
    oracle[1] = std::to_string(ablation.rows.front().seed);
  }
  oracle[2] = oracle[3] = oracle[4] = "oracle";
  oracle[7] = opt_number(ablation.oracle_report.map_allpoint);
  oracle[14] = ablation.oracle_params_hash;
  t.rows.push_back(std::move(oracle));
  return t;
}

Series map_series(const std::string& name, const TrainingHistory& history) {
  Series s{name, {}};
  for (const auto& e : history.entries) {
    if (e.val_map50) s.points.emplace_back(e.iteration, *e.val_map50);
  }
  return s;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::vector<Series>& series) {
  int max_iter = 0;
  bool any = false;
  for (const auto& s : series) {
    for (const auto& [it, v] : s.points) {
      max_iter = std::max(max_iter, it);
      any = true;
    }
  }
  if (!any) return "";
  if (max_iter == 0) max_iter = 1;

  constexpr double kW = 640, kH = 360, kLeft = 56, kRight = 150, kTop = 36, kBottom = 44;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double it) { return kLeft + pw * it / max_iter; };
  auto py = [&](double v) { return kTop + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
    << kW << ' ' << kH << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kLeft << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title)
    << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py(v) << "\" y2=\"" << py(v)
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << format_number(v, 2)
      << "</text>\n";
  }
  o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << kTop + ph << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft << "\" y1=\"" << kTop << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">iteration (max " << max_iter
    << ")</text>\n";
  o << "<text x=\"14\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 14 " << kTop + ph / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">val mAP@0.5</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % 6];
    if (!s.points.empty()) {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [it, v] : s.points) o << format_number(px(it), 1) << ',' << format_number(py(v), 1) << ' ';
      o << "\"/>\n";
    }
    const double ly = kTop + 14 + 18 * static_cast<double>(i);
    o << "<line x1=\"" << kLeft + pw + 12 << "\" x2=\"" << kLeft + pw + 32 << "\" y1=\"" << ly - 4 << "\" y2=\""
      << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::vector<std::string> write_charts(const std::vector<PipelineResult>& results, const fs::path& dir) {
  std::vector<std::string> charts;
  for (const auto& r : results) {
    if (r.error) continue;
    std::vector<Series> series = {map_series("baseline", r.baseline.history),
                                  map_series(r.flags.name(), r.student ? r.student->history : r.teacher.history),
                                  map_series("oracle", r.oracle.history)};
    if (r.student) series.push_back(map_series("teacher", r.teacher.history));
    const std::string svg = line_chart_svg(r.scenario + " seed " + std::to_string(r.seed) + " " + r.flags.name(), series);
    if (svg.empty()) continue;
    const std::string name = "map_" + r.flags.name() + ".svg";
    write_text(dir / name, svg);
    charts.push_back(name);
  }
  return charts;
}

void write_tables(const Table& table, const fs::path& path) {
  const std::string csv = to_csv(table);
  write_text(path, csv);
  // Read back what was written; a mismatch means the writer is broken.
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  if (parse_csv(buf.str()) != table) throw InternalError("tables.csv does not parse back to the written table");
}

}  // namespace

void emit_report(const std::vector<PipelineResult>& results, const fs::path& dir) {
  fs::create_directories(dir);
  json rows = json::array();
  for (const auto& r : results) rows.push_back(to_json(r));
  write_tables(results_table(results), dir / "tables.csv");
  const auto charts = write_charts(results, dir);
  write_text(dir / "report.json", json{{"rows", rows}, {"table", "tables.csv"}, {"charts", charts}}.dump(1) + "\n");
}

void emit_ablation_report(const AblationResult& ablation, const fs::path& dir) {
  fs::create_directories(dir);
  json rows = json::array();
  for (const auto& r : ablation.rows) rows.push_back(to_json(r));
  write_tables(ablation_table(ablation), dir / "tables.csv");
  const auto charts = write_charts(ablation.rows, dir);
  write_text(dir / "report.json", json{{"rows", rows},
                                       {"oracle", {{"report", to_json(ablation.oracle_report)},
                                                   {"params_hash", ablation.oracle_params_hash}}},
                                       {"table", "tables.csv"},
                                       {"charts", charts}}
                                      .dump(1) + "\n");
}

}  // namespace udadet
