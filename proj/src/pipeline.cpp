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

#include "udadet/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "udadet/audit.hpp"
#include "udadet/checkpoint.hpp"
#include "udadet/error.hpp"
#include "udadet/hashing.hpp"
#include "udadet/manifest.hpp"
#include "udadet/pseudolabel.hpp"
#include "udadet/report.hpp"

namespace udadet {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Flags and config
// ---------------------------------------------------------------------------

std::string Flags::name() const {
  return std::string("img") + (img ? "1" : "0") + "_fea" + (fea ? "1" : "0") + "_out" + (out ? "1" : "0");
}

Flags Flags::parse(const std::string& name) {
  if (name.size() != 14 || name.compare(0, 3, "img") != 0 || name.compare(4, 4, "_fea") != 0 ||
      name.compare(9, 4, "_out") != 0) {
    throw ConfigError("bad flags name '" + name + "', expected e.g. img1_fea0_out1");
  }
  auto bit = [&](char c) {
    if (c != '0' && c != '1') throw ConfigError("bad flags name '" + name + "'");
    return c == '1';
  };
  return {bit(name[3]), bit(name[8]), bit(name[13])};
}

TrainConfig ExperimentConfig::train_for(Role role) const {
  TrainConfig c = train;
  const std::string key(to_string(role));
  if (role_overrides.contains(key)) c = train_config_from_json(role_overrides[key], train);
  c.role = role;
  c.seed = seed;
  return c;
}

void ExperimentConfig::validate() const {
  scenario.validate();
  if (sizes.source_train < 1 || sizes.target_train < 1 || sizes.target_val < 1) {
    throw ConfigError("all split sizes must be >= 1");
  }
  if (translator.styles_per_image < 1) throw ConfigError("styles_per_image must be >= 1");
  if (!role_overrides.is_object()) throw ConfigError("'roles' must be an object");
  for (auto it = role_overrides.begin(); it != role_overrides.end(); ++it) role_from_string(it.key());
  for (Role r : {Role::kBaseline, Role::kOracle, Role::kTeacher, Role::kStudent}) train_for(r).validate();
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

json to_json(const ExperimentConfig& c) {
  return {{"scenario", to_json(c.scenario)},
          {"sizes", {{"source_train", c.sizes.source_train},
                     {"target_train", c.sizes.target_train},
                     {"target_val", c.sizes.target_val}}},
          {"seed", c.seed},
          {"flags", {{"img", c.flags.img}, {"fea", c.flags.fea}, {"out", c.flags.out}}},
          {"translator", {{"mode", to_string(c.translator.mode)}, {"styles_per_image", c.translator.styles_per_image}}},
          {"train", to_json(c.train)},
          {"roles", c.role_overrides},
          {"output_dir", c.output_dir.generic_string()}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    ExperimentConfig c;
    if (j.contains("scenario")) {
      const json& s = j["scenario"];
      c.scenario = s.is_string() ? make_scenario(scenario_from_string(s.get<std::string>())) : scenario_spec_from_json(s);
    }
    if (j.contains("sizes")) {
      const json& s = j["sizes"];
      c.sizes.source_train = s.value("source_train", c.sizes.source_train);
      c.sizes.target_train = s.value("target_train", c.sizes.target_train);
      c.sizes.target_val = s.value("target_val", c.sizes.target_val);
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("flags")) {
      const json& f = j["flags"];
      c.flags.img = f.value("img", c.flags.img);
      c.flags.fea = f.value("fea", c.flags.fea);
      c.flags.out = f.value("out", c.flags.out);
    }
    if (j.contains("translator")) {
      const json& t = j["translator"];
      if (t.contains("mode")) c.translator.mode = translator_mode_from_string(t["mode"].get<std::string>());
      c.translator.styles_per_image = t.value("styles_per_image", c.translator.styles_per_image);
    }
    if (j.contains("train")) c.train = train_config_from_json(j["train"]);
    if (j.contains("roles")) c.role_overrides = j["roles"];
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ExperimentConfig load_experiment_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (const char* root = std::getenv("UDADET_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
    doc["output_dir"] = root;
  }
  return experiment_config_from_json(doc);
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

namespace {

json model_json(const TrainedModel& m) {
  return {{"stage", m.stage}, {"checkpoint", m.checkpoint.generic_string()}, {"params_hash", m.params_hash},
          {"history", to_json(m.history)}};
}

TrainedModel model_from_json(const json& j) {
  TrainedModel m;
  m.stage = j.at("stage").get<std::string>();
  m.checkpoint = j.at("checkpoint").get<std::string>();
  m.params_hash = j.at("params_hash").get<std::string>();
  m.history = training_history_from_json(j.at("history"));
  return m;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_double(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

json to_json(const PipelineResult& r) {
  json j = {{"scenario", r.scenario},
            {"seed", r.seed},
            {"flags", r.flags.name()},
            {"stage_trace", r.stage_trace},
            {"final_params_hash", r.final_params_hash},
            {"coverage", optional_json(r.coverage)},
            {"coverage_voc11", optional_json(r.coverage_voc11)},
            {"error", r.error ? json(*r.error) : json(nullptr)}};
  if (r.error) return j;
  j["baseline"] = model_json(r.baseline);
  j["oracle"] = model_json(r.oracle);
  j["teacher"] = model_json(r.teacher);
  j["student"] = r.student ? model_json(*r.student) : json(nullptr);
  j["baseline_report"] = to_json(r.baseline_report);
  j["adapted_report"] = to_json(r.adapted_report);
  j["oracle_report"] = to_json(r.oracle_report);
  j["frechet"] = r.frechet ? json{{"source_target", r.frechet->source_target},
                                  {"translated_target", r.frechet->translated_target}}
                           : json(nullptr);
  j["pseudo_kept"] = r.pseudo_kept ? json(*r.pseudo_kept) : json(nullptr);
  j["pseudo_total"] = r.pseudo_total ? json(*r.pseudo_total) : json(nullptr);
  return j;
}

PipelineResult pipeline_result_from_json(const json& j) {
  try {
    PipelineResult r;
    r.scenario = j.at("scenario").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.flags = Flags::parse(j.at("flags").get<std::string>());
    r.stage_trace = j.at("stage_trace").get<std::vector<std::string>>();
    r.final_params_hash = j.at("final_params_hash").get<std::string>();
    r.coverage = optional_double(j, "coverage");
    r.coverage_voc11 = optional_double(j, "coverage_voc11");
    if (!j.at("error").is_null()) {
      r.error = j["error"].get<std::string>();
      return r;
    }
    r.baseline = model_from_json(j.at("baseline"));
    r.oracle = model_from_json(j.at("oracle"));
    r.teacher = model_from_json(j.at("teacher"));
    if (!j.at("student").is_null()) r.student = model_from_json(j["student"]);
    r.baseline_report = eval_report_from_json(j.at("baseline_report"));
    r.adapted_report = eval_report_from_json(j.at("adapted_report"));
    r.oracle_report = eval_report_from_json(j.at("oracle_report"));
    if (!j.at("frechet").is_null()) {
      r.frechet = FrechetSummary{j["frechet"].at("source_target").get<double>(),
                                 j["frechet"].at("translated_target").get<double>()};
    }
    if (!j.at("pseudo_kept").is_null()) r.pseudo_kept = j["pseudo_kept"].get<int>();
    if (!j.at("pseudo_total").is_null()) r.pseudo_total = j["pseudo_total"].get<int>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed pipeline result: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Stage bookkeeping
// ---------------------------------------------------------------------------

namespace {

std::string hash_json(const json& j) { return sha256_hex(j.dump()); }

std::optional<json> read_stage(const fs::path& dir) {
  std::ifstream in(dir / "stage.json");
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

bool fresh(const fs::path& dir, const std::string& hash) {
  const auto stage = read_stage(dir);
  return stage && stage->value("hash", std::string()) == hash;
}

void mark_stage(const fs::path& dir, const std::string& name, const std::string& hash, json extra) {
  fs::create_directories(dir);
  extra["stage"] = name;
  extra["hash"] = hash;
  std::ofstream out(dir / "stage.json");
  if (!out) throw DataError("cannot write " + (dir / "stage.json").string());
  out << extra.dump(1) << '\n';
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
}

std::vector<Sample> load_validation(const fs::path& path) {
  audit::ScopedStage stage("evaluate");
  return load_samples(read_manifest(path), true);
}

}  // namespace

Pipeline::Pipeline(ExperimentConfig config, bool auto_upstream)
    : config_(std::move(config)), auto_upstream_(auto_upstream) {
  config_.validate();
  root_ = config_.output_dir / std::string(to_string(config_.scenario.name));
}

std::string Pipeline::relative(const fs::path& p) const {
  return fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(root_).lexically_normal()).generic_string();
}

void Pipeline::require(bool present, const std::string& what, const std::string& command) const {
  if (present) return;
  throw DataError(what + " not found under " + root_.string() + "; run `udadet " + command + " <config>` first");
}

std::string Pipeline::data_hash() const {
  return hash_json({{"stage", "data"},
                    {"scenario", to_json(config_.scenario)},
                    {"sizes", {config_.sizes.source_train, config_.sizes.target_train, config_.sizes.target_val}},
                    {"seed", config_.seed}});
}

std::string Pipeline::translate_hash() {
  return hash_json({{"stage", "translate"},
                    {"data", data_hash()},
                    {"mode", to_string(config_.translator.mode)},
                    {"styles_per_image", config_.translator.styles_per_image}});
}

std::string Pipeline::train_hash(Role role, const Flags& flags) {
  TrainConfig c = config_.train_for(role);
  json j = {{"stage", "train"}, {"role", to_string(role)}, {"data", data_hash()}};
  if (role == Role::kTeacher) {
    c.feature_alignment = flags.fea;
    j["img"] = flags.img;
    if (flags.img) j["translate"] = translate_hash();
  }
  if (role == Role::kStudent) {
    j["pseudo"] = pseudo_hash(flags);
    if (flags.img) j["translate"] = translate_hash();
  }
  j["config"] = to_json(c);
  return hash_json(j);
}

std::string Pipeline::pseudo_hash(const Flags& flags) {
  Flags teacher_flags = flags;
  teacher_flags.out = false;
  return hash_json({{"stage", "pseudo-label"},
                    {"teacher", train_hash(Role::kTeacher, teacher_flags)},
                    {"pseudo", to_json(config_.train_for(Role::kStudent).pseudo)},
                    {"img", flags.img}});
}

DatasetPaths Pipeline::data() {
  const fs::path dir = root_ / "data";
  const std::string hash = data_hash();
  if (!fresh(dir, hash)) {
    audit::ScopedStage stage("gen-data");
    generate_dataset(config_.scenario, config_.sizes, config_.seed, dir);
    mark_stage(dir, "data", hash, {{"scenario", to_json(config_.scenario)}, {"seed", config_.seed}});
  }
  return DatasetPaths::in(dir);
}

fs::path Pipeline::translated() {
  const fs::path dir = root_ / "translated";
  const std::string hash = translate_hash();
  if (!fresh(dir, hash)) {
    require(auto_upstream_ || fresh(root_ / "data", data_hash()), "generated data", "gen-data");
    const DatasetPaths paths = data();
    audit::ScopedStage stage("translate");
    const Manifest source = read_manifest(paths.source_train);
    const Manifest target = read_manifest(paths.target_train);
    const TranslatorModel model = fit_translator(source, target, config_.translator.mode);
    write_json(dir / "translator.json", to_json(model));
    translate_dataset(model, source, config_.translator.styles_per_image, config_.seed, dir);
    mark_stage(dir, "translate", hash, {{"data", data_hash()}});
  }
  return dir / "translated.json";
}

TrainedModel Pipeline::train_stage(Role role, const Flags& flags, const fs::path& dir, const std::string& name) {
  const std::string hash = train_hash(role, flags);
  TrainConfig c = config_.train_for(role);
  if (role == Role::kTeacher) c.feature_alignment = flags.fea;
  const fs::path ckpt = dir / ("ckpt_" + std::to_string(c.total_iters()));

  if (fresh(dir, hash)) {
    const json stage = *read_stage(dir);
    return {name, ckpt, stage.at("params_hash").get<std::string>(),
            training_history_from_json(read_json(dir / "history.json"))};
  }

  require(auto_upstream_ || fresh(root_ / "data", data_hash()), "generated data", "gen-data");
  const DatasetPaths paths = data();
  TrainData td;
  const std::string stage_name = "train:" + std::string(to_string(role));
  {
    audit::ScopedStage stage(stage_name);
    switch (role) {
      case Role::kBaseline: td.labeled = load_samples(read_manifest(paths.source_train), true); break;
      case Role::kOracle: td.labeled = load_samples(read_manifest(paths.target_train_labels), true); break;
      case Role::kTeacher: {
        fs::path labeled = paths.source_train;
        if (flags.img) {
          require(auto_upstream_ || fresh(root_ / "translated", translate_hash()), "translated source set",
                  "translate");
          labeled = translated();
        }
        td.labeled = load_samples(read_manifest(labeled), true);
        if (flags.fea) td.unlabeled = load_samples(read_manifest(paths.target_train), false);
        break;
      }
      case Role::kStudent: {
        require(auto_upstream_ || fresh(row_dir(flags) / "labels", pseudo_hash(flags)), "pseudo labels",
                "pseudo-label");
        td.labeled = load_samples(read_manifest(pseudo_labels(flags).parent_path() / "joint.json"), true);
        break;
      }
    }
  }
  td.validation = load_validation(paths.target_val);

  audit::ScopedStage stage(stage_name);
  const TrainResult result = train(c, td, dir, hash);
  const std::string params = params_hash(result.params);
  mark_stage(dir, name, hash,
             {{"params_hash", params},
              {"final_hash", result.final_hash},
              {"checkpoint", relative(ckpt)},
              {"labeled_consumed", result.labeled_consumed},
              {"unlabeled_consumed", result.unlabeled_consumed}});
  return {name, ckpt, params, result.history};
}

fs::path Pipeline::model_dir(Role role, const Flags& flags) const {
  Flags f = flags;
  switch (role) {
    case Role::kBaseline: return root_ / "baseline";
    case Role::kOracle: return root_ / "oracle";
    case Role::kTeacher: f.out = false; return row_dir(f) / "ckpts" / "teacher";
    case Role::kStudent: f.out = true; return row_dir(f) / "ckpts" / "student";
  }
  throw InternalError("unknown role");
}

bool Pipeline::is_trained(Role role, const Flags& flags) {
  Flags f = flags;
  if (role == Role::kTeacher) f.out = false;
  if (role == Role::kStudent) f.out = true;
  return fresh(model_dir(role, f), train_hash(role, f));
}

TrainedModel Pipeline::baseline() {
  return train_stage(Role::kBaseline, Flags{false, false, false}, model_dir(Role::kBaseline, {}), "baseline");
}

TrainedModel Pipeline::oracle() {
  return train_stage(Role::kOracle, Flags{false, false, false}, model_dir(Role::kOracle, {}), "oracle");
}

TrainedModel Pipeline::teacher(const Flags& flags) {
  Flags f = flags;
  f.out = false;
  return train_stage(Role::kTeacher, f, model_dir(Role::kTeacher, f), f.name() + "/teacher");
}

fs::path Pipeline::pseudo_labels(const Flags& flags) {
  Flags f = flags;
  f.out = true;
  const fs::path dir = row_dir(f) / "labels";
  const std::string hash = pseudo_hash(f);
  if (!fresh(dir, hash)) {
    Flags tf = f;
    tf.out = false;
    require(auto_upstream_ || is_trained(Role::kTeacher, tf),
            "teacher checkpoint for " + tf.name(), "train --role teacher");
    const TrainedModel t = teacher(f);
    const DatasetPaths paths = data();
    fs::path labeled_path = paths.source_train;
    if (f.img) labeled_path = translated();

    audit::ScopedStage stage("pseudo-label");
    const Checkpoint ckpt = load_checkpoint(t.checkpoint);
    const Manifest target = read_manifest(paths.target_train);
    const PseudoDataset pseudo =
        generate_pseudo_labels(ckpt.params, target, config_.train_for(Role::kStudent).pseudo, t.params_hash);
    write_pseudo_dataset(dir / "pseudo.json", pseudo);
    const Manifest labeled = read_manifest(labeled_path);
    const Manifest joint = build_student_dataset(labeled, read_manifest(dir / "pseudo.json"), dir);
    write_manifest(dir / "joint.json", joint);
    mark_stage(dir, "pseudo-label", hash,
               {{"teacher", t.stage}, {"kept_count", pseudo.kept_count}, {"total_count", pseudo.total_count}});
  }
  return dir / "pseudo.json";
}

TrainedModel Pipeline::student(const Flags& flags) {
  Flags f = flags;
  f.out = true;
  return train_stage(Role::kStudent, f, model_dir(Role::kStudent, f), f.name() + "/student");
}

TrainedModel Pipeline::final_model(const Flags& flags) { return flags.out ? student(flags) : teacher(flags); }

EvalReport Pipeline::evaluate_model(const TrainedModel& model, const fs::path& report_path) {
  const EvalConfig eval = config_.train.eval;
  const std::string hash = hash_json({{"params", model.params_hash}, {"eval", to_json(eval)}, {"data", data_hash()}});
  if (fs::exists(report_path)) {
    const json existing = read_json(report_path);
    if (existing.value("hash", std::string()) == hash) return eval_report_from_json(existing.at("report"));
  }
  const DatasetPaths paths = data();
  const Checkpoint ckpt = load_checkpoint(model.checkpoint);
  const std::vector<Sample> val = load_validation(paths.target_val);
  EvalReport report = evaluate(ckpt.params, val, eval, false);
  report.metadata["model"] = model.stage;
  report.metadata["params_hash"] = model.params_hash;
  write_json(report_path, {{"hash", hash}, {"report", to_json(report)}});
  return report;
}

FrechetSummary Pipeline::frechet() {
  const fs::path path = root_ / "reports" / "frechet.json";
  const TrainedModel base = baseline();
  const fs::path translated_path = translated();
  const std::string hash = hash_json({{"baseline", base.params_hash}, {"translate", translate_hash()}});
  if (fs::exists(path)) {
    const json existing = read_json(path);
    if (existing.value("hash", std::string()) == hash) {
      return {existing.at("source_target").get<double>(), existing.at("translated_target").get<double>()};
    }
  }
  const DatasetPaths paths = data();
  audit::ScopedStage stage("frechet");
  const Checkpoint ckpt = load_checkpoint(base.checkpoint);
  const auto source = load_samples(read_manifest(paths.source_train), false);
  const auto target = load_samples(read_manifest(paths.target_train), false);
  const auto translated_samples = load_samples(read_manifest(translated_path), false);
  const FeatureStats fs_source = feature_stats(ckpt.params, source);
  const FeatureStats fs_target = feature_stats(ckpt.params, target);
  const FeatureStats fs_translated = feature_stats(ckpt.params, translated_samples);
  FrechetSummary out{frechet_distance(fs_source, fs_target), frechet_distance(fs_translated, fs_target)};
  write_json(path, {{"hash", hash},
                    {"features", "baseline backbone, global average pool"},
                    {"source_target", out.source_target},
                    {"translated_target", out.translated_target}});
  return out;
}

PipelineResult Pipeline::run(const Flags& flags) {
  PipelineResult r;
  r.scenario = std::string(to_string(config_.scenario.name));
  r.seed = config_.seed;
  r.flags = flags;

  r.baseline = baseline();
  r.oracle = oracle();
  if (flags.img) {
    translated();
    r.stage_trace.push_back("translate");
  }
  r.teacher = teacher(flags);
  r.stage_trace.push_back(flags.fea ? "teacher(grl)" : "teacher(supervised)");
  TrainedModel final = r.teacher;
  if (flags.out) {
    pseudo_labels(flags);
    r.stage_trace.push_back("pseudo-label");
    r.student = student(flags);
    r.stage_trace.push_back("student");
    final = *r.student;
    const auto stage = read_stage(row_dir(flags) / "labels");
    r.pseudo_kept = stage->at("kept_count").get<int>();
    r.pseudo_total = stage->at("total_count").get<int>();
  }
  r.final_params_hash = final.params_hash;
  trace_ = r.stage_trace;

  r.baseline_report = evaluate_model(r.baseline, root_ / "baseline" / "reports" / "eval.json");
  r.oracle_report = evaluate_model(r.oracle, root_ / "oracle" / "reports" / "eval.json");
  r.adapted_report = evaluate_model(final, row_dir(flags) / "reports" / "eval.json");
  auto gap = [](const std::optional<double>& b, const std::optional<double>& a,
                const std::optional<double>& o) -> std::optional<double> {
    if (!b || !a || !o) return std::nullopt;
    try {
      return coverage(*b, *a, *o);
    } catch (const DataError& e) {
      std::cerr << "warning: " << e.what() << "\n";
      return std::nullopt;
    }
  };
  r.coverage = gap(r.baseline_report.map_allpoint, r.adapted_report.map_allpoint, r.oracle_report.map_allpoint);
  r.coverage_voc11 = gap(r.baseline_report.map_voc11, r.adapted_report.map_voc11, r.oracle_report.map_voc11);
  r.frechet = frechet();

  for (TrainedModel* m : {&r.baseline, &r.oracle, &r.teacher}) m->checkpoint = relative(m->checkpoint);
  if (r.student) r.student->checkpoint = relative(r.student->checkpoint);

  write_json(row_dir(flags) / "reports" / "result.json", to_json(r));
  emit_report(std::vector<PipelineResult>{r}, row_dir(flags) / "reports");
  return r;
}

PipelineResult run_pipeline(const ExperimentConfig& config) {
  Pipeline p(config);
  return p.run(config.flags);
}

AblationResult run_ablation(const ExperimentConfig& base) {
  Pipeline p(base);
  AblationResult out;
  for (int bits = 0; bits < 8; ++bits) {
    const Flags flags{(bits & 4) != 0, (bits & 2) != 0, (bits & 1) != 0};
    try {
      out.rows.push_back(p.run(flags));
    } catch (const std::exception& e) {
      PipelineResult failed;
      failed.scenario = std::string(to_string(base.scenario.name));
      failed.seed = base.seed;
      failed.flags = flags;
      failed.error = e.what();
      std::cerr << "ablation row " << flags.name() << " failed: " << e.what() << "\n";
      out.rows.push_back(std::move(failed));
    }
  }
  const TrainedModel oracle = p.oracle();
  out.oracle_report = p.evaluate_model(oracle, p.root() / "oracle" / "reports" / "eval.json");
  out.oracle_params_hash = oracle.params_hash;
  emit_ablation_report(out, p.root() / "ablation");
  return out;
}

}  // namespace udadet
