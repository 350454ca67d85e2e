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

// udadet: command line driver for the adaptation pipeline.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "udadet/error.hpp"
#include "udadet/pipeline.hpp"
#include "udadet/report.hpp"

namespace {

using namespace udadet;
namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string flags;
  std::string role;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig c = load_experiment_config(o.config, o.overrides);
  if (!o.flags.empty()) c.flags = Flags::parse(o.flags);
  return c;
}

void print_result(const PipelineResult& r) {
  auto num = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("n/a"); };
  std::cout << r.scenario << " seed " << r.seed << " " << r.flags.name() << "\n"
            << "  mAP@50 baseline " << num(r.baseline_report.map_allpoint) << "  adapted "
            << num(r.adapted_report.map_allpoint) << "  oracle " << num(r.oracle_report.map_allpoint) << "\n"
            << "  coverage " << (r.coverage ? format_percent(*r.coverage) : "n/a") << "\n"
            << "  final params " << r.final_params_hash << "\n";
}

void require_model(Pipeline& p, Role role, const Flags& flags) {
  if (p.is_trained(role, flags)) return;
  throw DataError(std::string(to_string(role)) + " checkpoint for " + flags.name() + " not found under " +
                  p.root().string() + "; run `udadet train --role " + std::string(to_string(role)) +
                  " <config>` first");
}

int run(int argc, char** argv) {
  CLI::App app{"udadet: unsupervised domain adaptation for a small object detector"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool with_flags) {
    sub->add_option("config", o.config, "experiment config (JSON)")->required();
    sub->add_option("--set", o.overrides, "override a config value, e.g. --set train.iters_phase1=500");
    if (with_flags) sub->add_option("--flags", o.flags, "flag row, e.g. img1_fea1_out1 (default: config flags)");
  };

  auto* gen = app.add_subcommand("gen-data", "generate the scenario datasets");
  common(gen, false);
  auto* tr = app.add_subcommand("translate", "fit the translator and translate the source train set");
  common(tr, false);
  auto* train = app.add_subcommand("train", "train one model");
  common(train, true);
  train->add_option("--role", o.role, "baseline, oracle, teacher or student")->required();
  auto* pl = app.add_subcommand("pseudo-label", "label the target train set with the row's teacher");
  common(pl, true);
  auto* ev = app.add_subcommand("eval", "evaluate a trained row and write its result");
  common(ev, true);
  auto* pipe = app.add_subcommand("pipeline", "run every stage of one flag row");
  common(pipe, true);
  auto* abl = app.add_subcommand("ablate", "run all eight flag rows");
  common(abl, false);
  auto* rep = app.add_subcommand("report", "collect finished rows into one report");
  common(rep, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfigError);
  }

  const ExperimentConfig config = load(o);
  const Flags flags = config.flags;

  if (*gen) {
    Pipeline p(config, false);
    const DatasetPaths paths = p.data();
    std::cout << "data: " << paths.source_train.parent_path().string() << "\n";
  } else if (*tr) {
    Pipeline p(config, false);
    std::cout << "translated: " << p.translated().string() << "\n";
  } else if (*train) {
    Pipeline p(config, false);
    const Role role = role_from_string(o.role);
    TrainedModel m;
    switch (role) {
      case Role::kBaseline: m = p.baseline(); break;
      case Role::kOracle: m = p.oracle(); break;
      case Role::kTeacher: m = p.teacher(flags); break;
      case Role::kStudent: m = p.student(flags); break;
    }
    std::cout << m.stage << ": " << m.checkpoint.string() << "\n  params " << m.params_hash << "\n";
  } else if (*pl) {
    Pipeline p(config, false);
    std::cout << "pseudo labels: " << p.pseudo_labels(flags).string() << "\n";
  } else if (*ev) {
    Pipeline p(config, false);
    require_model(p, Role::kBaseline, flags);
    require_model(p, Role::kOracle, flags);
    require_model(p, flags.out ? Role::kStudent : Role::kTeacher, flags);
    print_result(p.run(flags));
  } else if (*pipe) {
    print_result(run_pipeline(config));
  } else if (*abl) {
    const AblationResult a = run_ablation(config);
    std::cout << to_csv(ablation_table(a));
  } else if (*rep) {
    Pipeline p(config, false);
    std::vector<PipelineResult> rows;
    for (int bits = 0; bits < 8; ++bits) {
      const Flags f{(bits & 4) != 0, (bits & 2) != 0, (bits & 1) != 0};
      const fs::path path = p.row_dir(f) / "reports" / "result.json";
      std::ifstream in(path);
      if (!in) continue;
      try {
        rows.push_back(pipeline_result_from_json(json::parse(in)));
      } catch (const json::exception& e) {
        throw DataError("cannot parse " + path.string() + ": " + e.what());
      }
    }
    if (rows.empty()) {
      throw DataError("no finished rows under " + p.root().string() + "; run `udadet pipeline <config>` first");
    }
    emit_report(rows, p.root() / "reports");
    std::cout << to_csv(results_table(rows));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const udadet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return static_cast<int>(udadet::ExitCode::kInternalError);
  }
}
