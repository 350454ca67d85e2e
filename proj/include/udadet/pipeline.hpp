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

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "udadet/engine.hpp"
#include "udadet/metrics.hpp"
#include "udadet/scenegen.hpp"
#include "udadet/translator.hpp"

namespace udadet {

struct Flags {
  bool img = true;
  bool fea = true;
  bool out = true;

  /// Directory name, e.g. "img1_fea0_out1".
  std::string name() const;
  static Flags parse(const std::string& name);
  bool operator==(const Flags&) const = default;
};

struct TranslatorSettings {
  TranslatorMode mode = TranslatorMode::kMultimodal;
  int styles_per_image = 1;
};

struct ExperimentConfig {
  ScenarioSpec scenario = make_scenario(ScenarioName::kAdverseWeather);
  DatasetSizes sizes;
  std::uint64_t seed = 1;
  Flags flags;
  TranslatorSettings translator;
  TrainConfig train;  // shared defaults; train.seed is replaced by `seed`
  // Optional per-role partial train configs: {"teacher": {...}, ...}.
  nlohmann::json role_overrides = nlohmann::json::object();
  std::filesystem::path output_dir = "runs";

  TrainConfig train_for(Role role) const;
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const nlohmann::json& json);

/// Applies "a.b.c=value" overrides to a JSON document. The value is parsed
/// as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads a JSON config file, applies overrides and the UDADET_OUTPUT_ROOT
/// environment variable.
ExperimentConfig load_experiment_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

struct TrainedModel {
  std::string stage;  // e.g. "baseline", "img1_fea1_out0/teacher"
  std::filesystem::path checkpoint;
  std::string params_hash;
  TrainingHistory history;
};

struct FrechetSummary {
  double source_target = 0.0;
  double translated_target = 0.0;
};

struct PipelineResult {
  std::string scenario;
  std::uint64_t seed = 0;
  Flags flags;
  std::vector<std::string> stage_trace;
  TrainedModel baseline;
  TrainedModel oracle;
  TrainedModel teacher;
  std::optional<TrainedModel> student;
  std::string final_params_hash;
  EvalReport baseline_report;
  EvalReport adapted_report;
  EvalReport oracle_report;
  std::optional<double> coverage;        // all-point mAP; null when undefined
  std::optional<double> coverage_voc11;
  std::optional<FrechetSummary> frechet;
  std::optional<int> pseudo_kept;
  std::optional<int> pseudo_total;
  std::optional<std::string> error;  // set when the row failed
};

nlohmann::json to_json(const PipelineResult& result);
PipelineResult pipeline_result_from_json(const nlohmann::json& json);

/// Stage runner over the on-disk layout
///   <out>/<scenario>/data/            generated splits
///   <out>/<scenario>/translated/      translated source set
///   <out>/<scenario>/baseline/, oracle/
///   <out>/<scenario>/<flags>/{ckpts,labels,reports}
/// Every stage writes a stage.json holding the hash of its inputs and is
/// skipped when that hash is already present. With `auto_upstream` false a
/// missing upstream stage is an error naming the command that produces it.
class Pipeline {
 public:
  explicit Pipeline(ExperimentConfig config, bool auto_upstream = true);

  const std::filesystem::path& root() const { return root_; }
  const ExperimentConfig& config() const { return config_; }

  DatasetPaths data();
  std::filesystem::path translated();
  TrainedModel baseline();
  TrainedModel oracle();
  TrainedModel teacher(const Flags& flags);
  std::filesystem::path pseudo_labels(const Flags& flags);
  TrainedModel student(const Flags& flags);
  /// Final model of a row: the student when OUT is set, else the teacher.
  TrainedModel final_model(const Flags& flags);
  EvalReport evaluate_model(const TrainedModel& model, const std::filesystem::path& report_path);
  FrechetSummary frechet();

  PipelineResult run(const Flags& flags);

  std::filesystem::path row_dir(const Flags& flags) const { return root_ / flags.name(); }
  /// Where the checkpoints of `role` live; teacher rows ignore OUT.
  std::filesystem::path model_dir(Role role, const Flags& flags) const;
  /// True when the stage output for `role` is present and matches the config.
  bool is_trained(Role role, const Flags& flags);
  std::string relative(const std::filesystem::path& p) const;

  const std::vector<std::string>& trace() const { return trace_; }

 private:
  std::string data_hash() const;
  std::string translate_hash();
  std::string train_hash(Role role, const Flags& flags);
  std::string pseudo_hash(const Flags& flags);
  TrainedModel train_stage(Role role, const Flags& flags, const std::filesystem::path& dir, const std::string& name);
  void require(bool present, const std::string& what, const std::string& command) const;

  ExperimentConfig config_;
  bool auto_upstream_;
  std::filesystem::path root_;
  std::vector<std::string> trace_;
};

PipelineResult run_pipeline(const ExperimentConfig& config);

struct AblationResult {
  std::vector<PipelineResult> rows;  // the eight flag combinations
  EvalReport oracle_report;
  std::string oracle_params_hash;
};

/// All eight flag rows over shared data, baseline and oracle. A failing row
/// is recorded with its error and the remaining rows still run.
AblationResult run_ablation(const ExperimentConfig& base);

}  // namespace udadet
