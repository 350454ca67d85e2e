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

#include <set>

#include "test_util.hpp"
#include "udadet/checkpoint.hpp"
#include "udadet/engine.hpp"
#include "udadet/scenegen.hpp"

using namespace udadet;

namespace {

TrainData source_data(int n, std::uint64_t seed = 2) {
  const ScenarioSpec spec = make_scenario(ScenarioName::kAdverseWeather);
  const DatasetSamples d = generate_dataset_samples(spec, {n, n, 2}, seed);
  TrainData data;
  data.labeled = d.source_train;
  return data;
}

TrainData teacher_data(int n) {
  const ScenarioSpec spec = make_scenario(ScenarioName::kAdverseWeather);
  const DatasetSamples d = generate_dataset_samples(spec, {n, n, 2}, 4);
  TrainData data;
  data.labeled = d.source_train;
  for (Sample s : d.target_train) {
    s.annotations.clear();
    data.unlabeled.push_back(s);
  }
  return data;
}

}  // namespace

TEST_CASE("zero iterations return the initial parameters") {
  const TrainConfig c = testing::short_train(Role::kBaseline, 0, 0, 9);
  const TrainResult r = train(c, source_data(2));
  CHECK(r.params == DetectorParams::initialize(c.detector, 9));
  CHECK(r.history.entries.empty());
  CHECK(r.lr_trace.empty());
}

TEST_CASE("learning rate is a single step drop after phase one") {
  const TrainConfig c = testing::short_train(Role::kBaseline, 30, 10);
  CHECK(c.lr_at(29) == 0.001);
  CHECK(c.lr_at(30) == 0.0001);
  const TrainResult r = train(c, source_data(3));
  REQUIRE(r.lr_trace.size() == 40);
  // Step iters_phase1 + 1 in 1-based counting.
  CHECK(r.lr_trace[30] == 0.0001);
  int drops = 0;
  for (std::size_t i = 1; i < r.lr_trace.size(); ++i) drops += r.lr_trace[i] != r.lr_trace[i - 1];
  CHECK(drops == 1);
  CHECK(r.lr_trace.front() == 0.001);
  CHECK(r.lr_trace.back() == 0.0001);
}

TEST_CASE("same seed and config give identical parameters") {
  const TrainConfig c = testing::short_train(Role::kBaseline, 25, 5, 3);
  const TrainData d = source_data(4);
  const TrainResult a = train(c, d), b = train(c, d);
  CHECK(a.final_hash == b.final_hash);
  CHECK(params_hash(a.params) == a.final_hash);
  TrainConfig other = c;
  other.seed = 4;
  CHECK(train(other, d).final_hash != a.final_hash);
}

TEST_CASE("teacher consumes one labeled and one unlabeled sample per step") {
  TrainConfig c = testing::short_train(Role::kTeacher, 12, 3);
  const TrainResult r = train(c, teacher_data(3));
  CHECK(r.labeled_consumed == 15);
  CHECK(r.unlabeled_consumed == 15);
  REQUIRE(r.domain.has_value());
  REQUIRE_FALSE(r.history.entries.empty());
  CHECK(r.history.entries.back().domain.has_value());

  c.feature_alignment = false;
  TrainData plain = teacher_data(3);
  plain.unlabeled.clear();
  const TrainResult s = train(c, plain);
  CHECK(s.unlabeled_consumed == 0);
  CHECK(s.labeled_consumed == 15);
  CHECK_FALSE(s.domain.has_value());

  // Without alignment the teacher is the baseline under another name.
  TrainConfig base = c;
  base.role = Role::kBaseline;
  CHECK(train(base, plain).final_hash == s.final_hash);
}

TEST_CASE("role data rules") {
  const TrainData src = source_data(2);
  TrainConfig oracle = testing::short_train(Role::kOracle, 1, 0);
  CHECK_THROWS_AS(train(oracle, src), ConfigError);
  TrainConfig baseline = testing::short_train(Role::kBaseline, 1, 0);
  TrainData with_unlabeled = teacher_data(2);
  CHECK_THROWS_AS(train(baseline, with_unlabeled), ConfigError);
  TrainConfig teacher = testing::short_train(Role::kTeacher, 1, 0);
  CHECK_THROWS_AS(train(teacher, src), ConfigError);

  TrainConfig student = testing::short_train(Role::kStudent, 1, 0);
  TrainData leak = src;
  Sample t = with_unlabeled.unlabeled[0];
  t.annotations = {{{2, 2, 10, 10}, 0}};
  leak.labeled.push_back(t);
  CHECK_THROWS_AS(train(student, leak), ConfigError);
  CHECK_THROWS_AS(train(baseline, TrainData{}), ConfigError);
}

TEST_CASE("history, checkpoints and logs in the run directory") {
  testing::TempDir dir("engine_run");
  TrainConfig c = testing::short_train(Role::kBaseline, 8, 2);
  c.eval_every = 4;
  TrainData d = source_data(3);
  const ScenarioSpec spec = make_scenario(ScenarioName::kAdverseWeather);
  d.validation = generate_dataset_samples(spec, {1, 1, 2}, 10).target_val;
  const TrainResult r = train(c, d, dir.path(), "cfg");
  REQUIRE(r.history.entries.size() == 3);  // 4, 8, 10
  CHECK(r.history.entries[0].iteration == 4);
  CHECK(r.history.entries[2].iteration == 10);
  for (const auto& e : r.history.entries) CHECK(e.val_map50.has_value());
  CHECK(std::filesystem::exists(dir / "ckpt_10"));
  CHECK(std::filesystem::exists(dir / "ckpt_best"));
  CHECK(std::filesystem::exists(dir / "history.json"));
  const Checkpoint ck = load_checkpoint(dir / "ckpt_10");
  CHECK(params_hash(ck.params) == r.final_hash);
  CHECK(ck.iteration == 10);
  CHECK(ck.velocity.has_value());
  CHECK(ck.config_hash == "cfg");

  c.selection = Selection::kBest;
  const TrainResult best = train(c, d);
  REQUIRE(best.best_hash.has_value());
  CHECK(params_hash(best.params) == *best.best_hash);
}

TEST_CASE("sample stream visits every index once per epoch") {
  SampleStream s(7, 42);
  for (int epoch = 0; epoch < 4; ++epoch) {
    std::set<std::size_t> seen;
    for (int i = 0; i < 7; ++i) seen.insert(s.next());
    CHECK(seen.size() == 7);
    CHECK(*seen.rbegin() == 6);
  }
  SampleStream a(10, 1), b(10, 1), c(10, 2);
  std::vector<std::size_t> va, vb, vc;
  for (int i = 0; i < 30; ++i) {
    va.push_back(a.next());
    vb.push_back(b.next());
    vc.push_back(c.next());
  }
  CHECK(va == vb);
  CHECK(va != vc);
}

TEST_CASE("train config JSON keeps defaults for absent keys") {
  TrainConfig base;
  base.iters_phase1 = 77;
  const TrainConfig c = train_config_from_json(nlohmann::json{{"lr_phase2", 0.5}}, base);
  CHECK(c.iters_phase1 == 77);
  CHECK(c.lr_phase2 == 0.5);
  const TrainConfig r = train_config_from_json(to_json(c));
  CHECK(to_json(r) == to_json(c));
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"lr_phase1", -1.0}}).validate(), ConfigError);
}
