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

#include "udadet/engine.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "udadet/checkpoint.hpp"
#include "udadet/error.hpp"
#include "udadet/hashing.hpp"

namespace udadet {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kBaseline: return "baseline";
    case Role::kOracle: return "oracle";
    case Role::kTeacher: return "teacher";
    case Role::kStudent: return "student";
  }
  return "baseline";
}

Role role_from_string(std::string_view name) {
  if (name == "baseline") return Role::kBaseline;
  if (name == "oracle") return Role::kOracle;
  if (name == "teacher") return Role::kTeacher;
  if (name == "student") return Role::kStudent;
  throw ConfigError("unknown role '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (iters_phase1 < 0 || iters_phase2 < 0) throw ConfigError("iteration counts must be >= 0");
  if (!(lr_phase1 > 0.0 && lr_phase2 > 0.0)) throw ConfigError("learning rates must be positive");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (!(sgd.momentum >= 0.0 && sgd.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(sgd.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  detector.validate();
  grl.validate();
  pseudo.validate();
}

json to_json(const TrainConfig& c) {
  return {{"role", to_string(c.role)},
          {"iters_phase1", c.iters_phase1},
          {"iters_phase2", c.iters_phase2},
          {"lr_phase1", c.lr_phase1},
          {"lr_phase2", c.lr_phase2},
          {"momentum", c.sgd.momentum},
          {"weight_decay", c.sgd.weight_decay},
          {"seed", c.seed},
          {"eval_every", c.eval_every},
          {"feature_alignment", c.feature_alignment},
          {"grl", to_json(c.grl)},
          {"pseudo", to_json(c.pseudo)},
          {"loss", to_json(c.loss)},
          {"detector", to_json(c.detector)},
          {"eval", to_json(c.eval)},
          {"selection", c.selection == Selection::kFinal ? "final" : "best"}};
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& base) {
  try {
    TrainConfig c = base;
    if (j.contains("role")) c.role = role_from_string(j["role"].get<std::string>());
    c.iters_phase1 = j.value("iters_phase1", c.iters_phase1);
    c.iters_phase2 = j.value("iters_phase2", c.iters_phase2);
    c.lr_phase1 = j.value("lr_phase1", c.lr_phase1);
    c.lr_phase2 = j.value("lr_phase2", c.lr_phase2);
    c.sgd.momentum = j.value("momentum", c.sgd.momentum);
    c.sgd.weight_decay = j.value("weight_decay", c.sgd.weight_decay);
    c.seed = j.value("seed", c.seed);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.feature_alignment = j.value("feature_alignment", c.feature_alignment);
    if (j.contains("grl")) c.grl = grl_config_from_json(j["grl"]);
    if (j.contains("pseudo")) c.pseudo = pseudo_label_config_from_json(j["pseudo"]);
    if (j.contains("loss")) c.loss = loss_options_from_json(j["loss"]);
    if (j.contains("detector")) c.detector = detector_config_from_json(j["detector"]);
    if (j.contains("eval")) c.eval = eval_config_from_json(j["eval"]);
    if (j.contains("selection")) {
      const std::string s = j["selection"].get<std::string>();
      if (s == "final") {
        c.selection = Selection::kFinal;
      } else if (s == "best") {
        c.selection = Selection::kBest;
      } else {
        throw ConfigError("selection must be 'final' or 'best'");
      }
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad train config: ") + e.what());
  }
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const TrainingHistory& h) {
  json out = json::array();
  for (const HistoryEntry& e : h.entries) {
    out.push_back({{"iteration", e.iteration},
                   {"lr", e.lr},
                   {"det_objectness", e.det_objectness},
                   {"det_class", e.det_class},
                   {"det_box", e.det_box},
                   {"det_total", e.det_total},
                   {"domain", optional_number(e.domain)},
                   {"val_map50", optional_number(e.val_map50)}});
  }
  return out;
}

TrainingHistory training_history_from_json(const json& j) {
  TrainingHistory h;
  try {
    for (const json& item : j) {
      HistoryEntry e;
      e.iteration = item.at("iteration").get<int>();
      e.lr = item.at("lr").get<double>();
      e.det_objectness = item.at("det_objectness").get<double>();
      e.det_class = item.at("det_class").get<double>();
      e.det_box = item.at("det_box").get<double>();
      e.det_total = item.at("det_total").get<double>();
      if (!item.at("domain").is_null()) e.domain = item["domain"].get<double>();
      if (!item.at("val_map50").is_null()) e.val_map50 = item["val_map50"].get<double>();
      h.entries.push_back(e);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed training history: ") + e.what());
  }
  return h;
}

SampleStream::SampleStream(std::size_t n, std::uint64_t seed) : order_(n), seed_(seed) {
  if (n == 0) throw ConfigError("cannot draw samples from an empty dataset");
  reshuffle();
}

void SampleStream::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed_, epoch_++));
  // Fisher-Yates with an explicit bounded draw so the order does not depend
  // on the standard library's shuffle implementation.
  for (std::size_t i = order_.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order_[i - 1], order_[j]);
  }
  position_ = 0;
}

std::size_t SampleStream::next() {
  if (position_ == order_.size()) reshuffle();
  return order_[position_++];
}

void check_role_data(const TrainConfig& config, const TrainData& data) {
  const std::string role(to_string(config.role));
  if (data.labeled.empty()) throw ConfigError(role + " training needs a labeled dataset");
  auto all_domains = [](const std::vector<Sample>& samples, auto pred) {
    return std::all_of(samples.begin(), samples.end(), [&](const Sample& s) { return pred(s.domain); });
  };
  auto has_pseudo = [](const Sample& s) {
    return std::any_of(s.annotations.begin(), s.annotations.end(),
                       [](const Annotation& a) { return a.provenance == Provenance::kPseudo; });
  };
  switch (config.role) {
    case Role::kBaseline:
      if (!all_domains(data.labeled, [](Domain d) { return d == Domain::kSource; })) {
        throw ConfigError("baseline training expects labeled source images only");
      }
      if (!data.unlabeled.empty()) throw ConfigError("baseline training takes no unlabeled data");
      break;
    case Role::kOracle:
      if (!all_domains(data.labeled, [](Domain d) { return d == Domain::kTarget; })) {
        throw ConfigError("oracle training expects labeled target images only");
      }
      if (std::any_of(data.labeled.begin(), data.labeled.end(), has_pseudo)) {
        throw ConfigError("oracle training expects ground-truth target labels");
      }
      if (!data.unlabeled.empty()) throw ConfigError("oracle training takes no unlabeled data");
      break;
    case Role::kTeacher:
      if (!all_domains(data.labeled, [](Domain d) { return d != Domain::kTarget; })) {
        throw ConfigError("teacher training expects labeled source or translated images");
      }
      if (config.feature_alignment) {
        if (data.unlabeled.empty()) throw ConfigError("teacher alignment needs unlabeled target images");
        if (!all_domains(data.unlabeled, [](Domain d) { return d == Domain::kTarget; })) {
          throw ConfigError("teacher unlabeled set must contain target images only");
        }
      } else if (!data.unlabeled.empty()) {
        throw ConfigError("teacher without alignment takes no unlabeled data");
      }
      break;
    case Role::kStudent:
      if (!data.unlabeled.empty()) throw ConfigError("student training takes no unlabeled data");
      for (const Sample& s : data.labeled) {
        if (s.domain == Domain::kTarget) {
          for (const Annotation& a : s.annotations)
            if (a.provenance != Provenance::kPseudo) {
              throw ConfigError("student training must not see ground-truth target labels");
            }
        }
      }
      break;
  }
}

TrainResult train(const TrainConfig& config, const TrainData& data, const std::optional<std::filesystem::path>& run_dir,
                  const std::string& config_hash) {
  config.validate();
  check_role_data(config, data);

  const bool align = config.role == Role::kTeacher && config.feature_alignment;
  LossOptions loss = config.loss;
  if (config.role == Role::kStudent && config.pseudo.label_mode == LabelMode::kSoft) {
    loss.soft_alpha = config.pseudo.alpha;
    loss.soft_temperature = config.pseudo.temperature;
  }

  TrainResult result;
  DetectorParams params = DetectorParams::initialize(config.detector, config.seed);
  DetectorParams velocity = DetectorParams::zeros(config.detector);
  std::optional<DomainClassifier> domain;
  std::optional<TeacherState> teacher_state;
  if (align) {
    domain = DomainClassifier::initialize(config.detector.feature_channels(), mix_seed(config.seed, 3));
    teacher_state = make_teacher_state(params, *domain);
  }
  const std::uint64_t invocations_before = domain_classifier_invocations();

  SampleStream labeled_stream(data.labeled.size(), mix_seed(config.seed, 1));
  std::optional<SampleStream> unlabeled_stream;
  if (align) unlabeled_stream.emplace(data.unlabeled.size(), mix_seed(config.seed, 2));

  std::ofstream log;
  if (run_dir) {
    std::filesystem::create_directories(*run_dir);
    log.open(*run_dir / "log.jsonl");
    if (!log) throw DataError("cannot write training log in " + run_dir->string());
  }

  auto checkpoint_of = [&](const DetectorParams& p, int iteration) {
    Checkpoint c;
    c.params = p;
    c.velocity = align ? teacher_state->velocity : velocity;
    if (domain) {
      c.domain = *domain;
      c.domain_velocity = teacher_state->d_velocity;
    }
    c.iteration = iteration;
    c.role = std::string(to_string(config.role));
    c.config_hash = config_hash;
    return c;
  };

  HistoryEntry window;
  int window_steps = 0;
  double window_domain = 0.0;
  DetectorParams best = params;
  const int total = config.total_iters();
  for (int it = 0; it < total; ++it) {
    const double lr = config.lr_at(it);
    result.lr_trace.push_back(lr);
    const Sample& labeled = data.labeled[labeled_stream.next()];
    ++result.labeled_consumed;
    json record;
    if (align) {
      const Sample& unlabeled = data.unlabeled[unlabeled_stream->next()];
      ++result.unlabeled_consumed;
      const TeacherLoss l =
          teacher_step(params, *domain, labeled, unlabeled, config.grl, it, lr, config.sgd, *teacher_state, loss);
      window.det_objectness += l.det_objectness;
      window.det_class += l.det_class;
      window.det_box += l.det_box;
      window.det_total += l.det_total;
      window_domain += l.domain;
      record = to_json(l);
    } else {
      const SupervisedGradients g = supervised_gradients(params, labeled, loss);
      sgd_step(params.named(), g.grads.named(), velocity.named(), lr, config.sgd);
      window.det_objectness += g.loss.objectness;
      window.det_class += g.loss.classification;
      window.det_box += g.loss.box;
      window.det_total += g.loss.total;
      record = {{"det_objectness", g.loss.objectness},
                {"det_class", g.loss.classification},
                {"det_box", g.loss.box},
                {"det_total", g.loss.total},
                {"domain", nullptr},
                {"lambda", nullptr}};
    }
    ++window_steps;
    if (log.is_open()) {
      record["iteration"] = it + 1;
      record["lr"] = lr;
      log << record.dump() << '\n';
    }
    if (!params.all_finite()) {
      throw InternalError(std::string(to_string(config.role)) + " training diverged at iteration " +
                          std::to_string(it + 1));
    }

    const int done = it + 1;
    if (done % config.eval_every == 0 || done == total) {
      HistoryEntry e;
      e.iteration = done;
      e.lr = lr;
      e.det_objectness = window.det_objectness / window_steps;
      e.det_class = window.det_class / window_steps;
      e.det_box = window.det_box / window_steps;
      e.det_total = window.det_total / window_steps;
      if (align) e.domain = window_domain / window_steps;
      if (!data.validation.empty()) {
        e.val_map50 = evaluate(params, data.validation, config.eval, true).map_allpoint.value_or(0.0);
        if (!result.best_map50 || *e.val_map50 > *result.best_map50) {
          result.best_map50 = e.val_map50;
          result.best_iteration = done;
          best = params;
          if (run_dir) save_checkpoint(*run_dir / "ckpt_best", checkpoint_of(params, done));
        }
      }
      result.history.entries.push_back(e);
      window = {};
      window_steps = 0;
      window_domain = 0.0;
    }
  }

  if (config.role == Role::kStudent && domain_classifier_invocations() != invocations_before) {
    throw InternalError("student training invoked the domain classifier");
  }

  result.final_params = params;
  result.final_hash = params_hash(params);
  if (result.best_map50) result.best_hash = params_hash(best);
  result.params = config.selection == Selection::kBest && result.best_map50 ? best : params;
  result.domain = domain;
  if (run_dir) {
    save_checkpoint(*run_dir / ("ckpt_" + std::to_string(total)), checkpoint_of(params, total));
    std::ofstream out(*run_dir / "history.json");
    if (!out) throw DataError("cannot write history in " + run_dir->string());
    out << to_json(result.history).dump(1) << '\n';
  }
  return result;
}

}  // namespace udadet
