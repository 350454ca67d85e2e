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

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "udadet/audit.hpp"
#include "udadet/hashing.hpp"
#include "udadet/manifest.hpp"
#include "udadet/metrics.hpp"
#include "udadet/pipeline.hpp"
#include "udadet/report.hpp"

using namespace udadet;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c;
  c.sizes = {6, 4, 3};
  c.seed = 5;
  c.train.iters_phase1 = 12;
  c.train.iters_phase2 = 4;
  c.train.eval_every = 8;
  c.output_dir = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = sha256_file(e.path());
  return out;
}

int run_cli(const std::string& args, const fs::path& out_root) {
  const std::string cmd = "UDADET_OUTPUT_ROOT='" + out_root.string() + "' '" UDADET_CLI_PATH "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("flag names") {
  CHECK(Flags{true, false, true}.name() == "img1_fea0_out1");
  for (int bits = 0; bits < 8; ++bits) {
    const Flags f{(bits & 4) != 0, (bits & 2) != 0, (bits & 1) != 0};
    CHECK(Flags::parse(f.name()) == f);
  }
  CHECK_THROWS_AS(Flags::parse("img1_fea1"), ConfigError);
  CHECK_THROWS_AS(Flags::parse("img2_fea0_out0"), ConfigError);
}

TEST_CASE("config overrides and the output root variable") {
  testing::TempDir dir("config");
  json doc = {{"scenario", "sim2real"}, {"train", {{"iters_phase1", 10}}}};
  apply_override(doc, "train.iters_phase2=3");
  apply_override(doc, "translator.mode=deterministic");
  apply_override(doc, "flags.out=false");
  CHECK(doc["train"]["iters_phase2"] == 3);
  CHECK(doc["translator"]["mode"] == "deterministic");
  CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigError);

  {
    std::ofstream(dir / "c.json") << doc.dump();
  }
  ::unsetenv("UDADET_OUTPUT_ROOT");
  ExperimentConfig c = load_experiment_config(dir / "c.json", {"seed=9"});
  CHECK(c.scenario.name == ScenarioName::kSim2Real);
  CHECK(c.train.iters_phase1 == 10);
  CHECK(c.train.iters_phase2 == 3);
  CHECK(c.translator.mode == TranslatorMode::kDeterministic);
  CHECK_FALSE(c.flags.out);
  CHECK(c.seed == 9);
  CHECK(c.train_for(Role::kTeacher).seed == 9);
  ::setenv("UDADET_OUTPUT_ROOT", (dir / "elsewhere").c_str(), 1);
  c = load_experiment_config(dir / "c.json", {});
  CHECK(c.output_dir == dir / "elsewhere");
  ::unsetenv("UDADET_OUTPUT_ROOT");

  const ExperimentConfig r = experiment_config_from_json(to_json(c));
  CHECK(to_json(r) == to_json(c));

  {
    std::ofstream(dir / "bad.json") << "{not json";
  }
  CHECK_THROWS_AS(load_experiment_config(dir / "bad.json", {}), ConfigError);
  CHECK_THROWS_AS(load_experiment_config(dir / "missing.json", {}), ConfigError);
  CHECK_THROWS_AS(load_experiment_config(dir / "c.json", {"sizes.source_train=0"}), ConfigError);
  CHECK_THROWS_AS(load_experiment_config(dir / "c.json", {"roles.critic={}"}), ConfigError);
}

TEST_CASE("role overrides apply per role") {
  ExperimentConfig c;
  c.role_overrides = {{"student", {{"iters_phase1", 5}}}};
  CHECK(c.train_for(Role::kStudent).iters_phase1 == 5);
  CHECK(c.train_for(Role::kTeacher).iters_phase1 == c.train.iters_phase1);
}

TEST_CASE("stage semantics of single rows") {
  testing::TempDir dir("pipeline_rows");
  Pipeline p(tiny(dir.path()));

  const PipelineResult full = p.run({true, true, true});
  CHECK(full.stage_trace == std::vector<std::string>{"translate", "teacher(grl)", "pseudo-label", "student"});
  REQUIRE(full.student.has_value());
  CHECK(full.final_params_hash == full.student->params_hash);
  CHECK(fs::exists(p.row_dir({true, true, true}) / "reports" / "result.json"));
  CHECK(fs::exists(p.row_dir({true, true, true}) / "labels" / "joint.json"));

  const PipelineResult out_only = p.run({false, false, true});
  CHECK(out_only.stage_trace == std::vector<std::string>{"teacher(supervised)", "pseudo-label", "student"});
  // The OUT-only teacher is the source-trained baseline.
  CHECK(out_only.teacher.params_hash == out_only.baseline.params_hash);
  const Manifest joint = read_manifest(p.row_dir({false, false, true}) / "labels" / "joint.json");
  std::set<Domain> domains;
  for (const auto& r : joint.images) domains.insert(r.domain);
  CHECK(domains == std::set<Domain>{Domain::kSource, Domain::kTarget});
  const DatasetPaths data = p.data();
  CHECK(joint.size() == read_manifest(data.source_train).size() + read_manifest(data.target_train).size());

  const PipelineResult none = p.run({false, false, false});
  CHECK(none.stage_trace == std::vector<std::string>{"teacher(supervised)"});
  CHECK(none.final_params_hash == none.baseline.params_hash);
  CHECK_FALSE(none.student.has_value());

  const PipelineResult back = pipeline_result_from_json(json::parse(slurp(p.row_dir({true, true, true}) / "reports" / "result.json")));
  CHECK(back.final_params_hash == full.final_params_hash);
}

TEST_CASE("target labels are read only by oracle training and evaluation") {
  testing::TempDir dir("pipeline_audit");
  audit::clear();
  const AblationResult ab = run_ablation(tiny(dir.path()));
  REQUIRE(ab.rows.size() == 8);
  for (const auto& r : ab.rows) CHECK_FALSE(r.error.has_value());

  const DatasetPaths data = DatasetPaths::in(dir.path() / "adverse-weather" / "data");
  const std::string train_labels = fs::absolute(data.target_train_labels).lexically_normal().string();
  const std::string val = fs::absolute(data.target_val).lexically_normal().string();
  const std::string val_dir = fs::absolute(data.target_val.parent_path() / "target_val").lexically_normal().string();
  int train_label_reads = 0, val_reads = 0;
  for (const auto& e : audit::entries()) {
    if (e.path == train_labels) {
      ++train_label_reads;
      CHECK(e.stage == "train:oracle");
    }
    if (e.path == val || e.path.rfind(val_dir + "/", 0) == 0) {
      ++val_reads;
      CHECK(e.stage == "evaluate");
    }
  }
  CHECK(train_label_reads > 0);
  CHECK(val_reads > 0);

  CHECK(ab.rows[0].flags == Flags{false, false, false});
  CHECK(ab.rows[0].final_params_hash == ab.rows[0].baseline.params_hash);
  CHECK(fs::exists(dir.path() / "adverse-weather" / "ablation" / "tables.csv"));
  const Table t = parse_csv(slurp(dir.path() / "adverse-weather" / "ablation" / "tables.csv"));
  CHECK(t.rows.size() == 9);
}

TEST_CASE("reruns are byte identical") {
  testing::TempDir a("rerun_a"), b("rerun_b");
  run_pipeline(tiny(a.path()));
  run_pipeline(tiny(b.path()));
  const auto ha = tree_hashes(a.path());
  CHECK(ha == tree_hashes(b.path()));
  // A second run over an existing tree reuses every stage and changes nothing.
  run_pipeline(tiny(a.path()));
  CHECK(ha == tree_hashes(a.path()));
}

TEST_CASE("missing upstream stages name the producing command") {
  testing::TempDir dir("upstream");
  Pipeline p(tiny(dir.path()), false);
  try {
    p.baseline();
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("udadet gen-data") != std::string::npos);
  }
  p.data();
  try {
    p.student({true, true, true});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("udadet") != std::string::npos);
  }
}

TEST_CASE("report formatting") {
  CHECK(format_percent(coverage(33.48, 47.31, 47.56)) == "98.22%");
  CHECK(format_percent(coverage(39.40, 46.60, 58.60)) == "37.50%");
  CHECK(format_percent(coverage(38.20, 43.90, 55.80)) == "32.39%");
  CHECK(format_number(0.123456) == "0.1235");

  Table t{{"a", "b,c"}, {{"x\"y", "1"}, {"line\nbreak", ""}}};
  CHECK(parse_csv(to_csv(t)) == t);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), DataError);
  CHECK_THROWS_AS(parse_csv("a\n\"open\n"), DataError);

  CHECK(line_chart_svg("empty", {}).empty());
  const std::string svg = line_chart_svg("m", {{"s", {{0, 0.1}, {10, 0.5}}}});
  CHECK(svg.find("<svg") == 0);
}

TEST_CASE("empty histories omit charts but still write tables") {
  testing::TempDir dir("report_empty");
  PipelineResult r;
  r.scenario = "adverse-weather";
  r.flags = {false, false, false};
  emit_report({r}, dir.path());
  CHECK(fs::exists(dir / "tables.csv"));
  CHECK(fs::exists(dir / "report.json"));
  CHECK_FALSE(fs::exists(dir / "map_img0_fea0_out0.svg"));
  const Table t = parse_csv(slurp(dir / "tables.csv"));
  REQUIRE(t.rows.size() == 1);
  const auto col = std::find(t.header.begin(), t.header.end(), "coverage") - t.header.begin();
  CHECK(t.rows[0][col].empty());
}

TEST_CASE("cli exit codes") {
  testing::TempDir dir("cli");
  {
    std::ofstream(dir / "c.json") << to_json(tiny(dir / "unused")).dump();
  }
  const std::string cfg = "'" + (dir / "c.json").string() + "'";
  const fs::path out = dir / "out";
  CHECK(run_cli("--help", out) == 0);
  CHECK(run_cli("", out) == 2);
  CHECK(run_cli("train " + cfg + " --role critic", out) == 2);
  CHECK(run_cli("gen-data '" + (dir / "nope.json").string() + "'", out) == 2);
  CHECK(run_cli("train " + cfg + " --role baseline", out) == 3);  // no data yet
  CHECK(run_cli("gen-data " + cfg, out) == 0);
  CHECK(run_cli("train " + cfg + " --role baseline", out) == 0);
  CHECK(run_cli("eval " + cfg + " --flags img0_fea0_out0", out) == 3);  // oracle missing
  CHECK(run_cli("train " + cfg + " --role oracle", out) == 0);
  CHECK(run_cli("eval " + cfg + " --flags img0_fea0_out0", out) == 3);  // teacher missing
  CHECK(run_cli("train " + cfg + " --role teacher --flags img0_fea0_out0", out) == 0);
  CHECK(run_cli("eval " + cfg + " --flags img0_fea0_out0", out) == 0);
  CHECK(run_cli("report " + cfg, out) == 0);
  CHECK(fs::exists(out / "adverse-weather" / "reports" / "tables.csv"));
  CHECK(run_cli("pipeline " + cfg + " --set flags.img=false --set flags.fea=false", out) == 0);
}

TEST_CASE("separate subcommands reproduce the pipeline byte for byte") {
  testing::TempDir dir("compose");
  {
    std::ofstream(dir / "c.json") << to_json(tiny(dir / "unused")).dump();
  }
  const std::string cfg = "'" + (dir / "c.json").string() + "'";
  const fs::path chained = dir / "chained", whole = dir / "whole";
  for (const std::string step : {"gen-data", "translate", "train --role baseline", "train --role oracle",
                                 "train --role teacher", "pseudo-label", "train --role student", "eval"}) {
    REQUIRE(run_cli(step + " " + cfg, chained) == 0);
  }
  REQUIRE(run_cli("pipeline " + cfg, whole) == 0);
  const auto a = tree_hashes(chained), b = tree_hashes(whole);
  CHECK(a.size() > 20);
  CHECK(a == b);
}
