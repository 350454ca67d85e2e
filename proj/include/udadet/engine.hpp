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
#include <span>
#include <string>
#include <vector>

#include "udadet/detector.hpp"
#include "udadet/grl_align.hpp"
#include "udadet/metrics.hpp"
#include "udadet/optim.hpp"
#include "udadet/pseudolabel.hpp"

namespace udadet {

enum class Role { kBaseline, kOracle, kTeacher, kStudent };

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

enum class Selection { kFinal, kBest };

struct TrainConfig {
  Role role = Role::kBaseline;
  int iters_phase1 = 3000;
  int iters_phase2 = 1000;
  double lr_phase1 = 0.001;
  double lr_phase2 = 0.0001;
  SgdConfig sgd;
  std::uint64_t seed = 0;
  int eval_every = 200;
  // Teacher only: when false the teacher is trained like the baseline on its
  // labeled set and never touches unlabeled data.
  bool feature_alignment = true;
  GrlConfig grl;
  PseudoLabelConfig pseudo;  // student only; supplies the soft-label loss terms
  LossOptions loss;
  DetectorConfig detector;
  EvalConfig eval;
  Selection selection = Selection::kFinal;

  int total_iters() const { return iters_phase1 + iters_phase2; }
  /// Learning rate of the 0-based step `iteration`.
  double lr_at(int iteration) const { return iteration < iters_phase1 ? lr_phase1 : lr_phase2; }
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
/// Keys absent from the JSON keep the defaults of `base`.
TrainConfig train_config_from_json(const nlohmann::json& json, const TrainConfig& base = {});

struct HistoryEntry {
  int iteration = 0;  // 1-based count of steps taken
  double lr = 0.0;
  // Loss components averaged over the steps since the previous entry.
  double det_objectness = 0.0;
  double det_class = 0.0;
  double det_box = 0.0;
  double det_total = 0.0;
  std::optional<double> domain;
  std::optional<double> val_map50;
};

struct TrainingHistory {
  std::vector<HistoryEntry> entries;
};

nlohmann::json to_json(const TrainingHistory& history);
TrainingHistory training_history_from_json(const nlohmann::json& json);

struct TrainData {
  std::vector<Sample> labeled;
  std::vector<Sample> unlabeled;  // teacher with alignment only
  std::vector<Sample> validation;  // may be empty; then no validation is recorded
};

/// Throws ConfigError when the datasets do not fit the role.
void check_role_data(const TrainConfig& config, const TrainData& data);

struct TrainResult {
  DetectorParams params;  // selected per config.selection
  DetectorParams final_params;
  std::optional<DomainClassifier> domain;
  TrainingHistory history;
  std::string final_hash;
  std::optional<std::string> best_hash;
  std::optional<double> best_map50;
  int best_iteration = 0;
  std::vector<double> lr_trace;  // lr of every step
  int labeled_consumed = 0;
  int unlabeled_consumed = 0;
};

/// When `run_dir` is given: `ckpt_<iters>` (final), `ckpt_best`,
/// `history.json` and `log.jsonl` are written there.
TrainResult train(const TrainConfig& config, const TrainData& data,
                  const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                  const std::string& config_hash = "");

/// Seed-derived sample order: epoch-wise permutations of [0, n).
class SampleStream {
 public:
  SampleStream(std::size_t n, std::uint64_t seed);
  std::size_t next();

 private:
  std::vector<std::size_t> order_;
  std::size_t position_ = 0;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  void reshuffle();
};

}  // namespace udadet
