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

#include <cmath>
#include <set>

#include "test_util.hpp"
#include "udadet/manifest.hpp"
#include "udadet/scenegen.hpp"

using namespace udadet;

namespace {

DomainSpec plain_domain() {
  DomainSpec d;
  d.palette = {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
  return d;
}

// Pixel extent of everything brighter than the background.
// Pixels where the object changed the render, relative to the same scene with no objects.
BoundingBox mask_extent(const Image& img, const Image& empty) {
  int x0 = img.width(), y0 = img.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (std::abs(img.at(y, x, 0) - empty.at(y, x, 0)) > 1e-9) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  return {double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
}

BoundingBox object_extent(const SceneObject& o, ImageSize size, std::uint64_t seed) {
  const Image img = render_scene({size, {o}}, seed, plain_domain()).image;
  const Image empty = render_scene({size, {}}, seed, plain_domain()).image;
  return mask_extent(img, empty);
}

}  // namespace

TEST_CASE("scene generation is a pure function of seed and spec") {
  const ScenarioSpec spec = make_scenario(ScenarioName::kSim2Real);
  const Sample a = generate_scene(7, spec.source, spec.size, spec.object_count);
  const Sample b = generate_scene(7, spec.source, spec.size, spec.object_count);
  CHECK(a == b);
  const Sample c = generate_scene(8, spec.source, spec.size, spec.object_count);
  CHECK_FALSE(a.image == c.image);
}

TEST_CASE("empty object range gives no annotations") {
  const ScenarioSpec spec = make_scenario(ScenarioName::kCrossCamera);
  const Sample s = generate_scene(3, spec.source, spec.size, CountRange{0, 0});
  CHECK(s.annotations.empty());
  CHECK(s.image.in_unit_range());
}

TEST_CASE("boxes are tight around the rendered object masks") {
  const ImageSize size{64, 64};
  const SceneLayout layout = layout_scene(3, size, CountRange{1, 3});
  REQUIRE(layout.objects.size() >= 1);
  REQUIRE(layout.objects.size() <= 3);
  const Sample full = render_scene(layout, 3, plain_domain());
  REQUIRE(full.annotations.size() == layout.objects.size());
  for (std::size_t i = 0; i < layout.objects.size(); ++i) {
    const BoundingBox& box = full.annotations[i].box;
    CHECK(box.is_valid(64, 64));
    const BoundingBox extent = object_extent(layout.objects[i], size, 3);
    CHECK(std::abs(extent.x_min - box.x_min) <= 1.0);
    CHECK(std::abs(extent.y_min - box.y_min) <= 1.0);
    CHECK(std::abs(extent.x_max - box.x_max) <= 1.0);
    CHECK(std::abs(extent.y_max - box.y_max) <= 1.0);
  }
}

TEST_CASE("box tightness holds over many layouts and all classes") {
  std::set<int> classes;
  for (std::uint64_t seed = 100; seed < 160; ++seed) {
    const SceneLayout layout = layout_scene(seed, {64, 64}, {1, 3});
    for (const SceneObject& o : layout.objects) {
      classes.insert(o.class_id);
      const BoundingBox box = o.box();
      const BoundingBox extent = object_extent(o, {64, 64}, seed);
      CHECK(std::abs(extent.x_min - box.x_min) <= 1.0);
      CHECK(std::abs(extent.x_max - box.x_max) <= 1.0);
      CHECK(std::abs(extent.y_min - box.y_min) <= 1.0);
      CHECK(std::abs(extent.y_max - box.y_max) <= 1.0);
    }
  }
  CHECK(classes.size() == 3);
}

TEST_CASE("apply_fog formula") {
  Sample s;
  s.image = Image(8, 4, 0.2);
  s.annotations.push_back({{1, 1, 3, 3}, 2});

  SUBCASE("beta zero is the identity") {
    const Sample out = apply_fog(s, 0.0, 0.8);
    CHECK(out.image == s.image);
    CHECK(out.annotations == s.annotations);
  }
  SUBCASE("large beta drives the far rows to the airlight") {
    const Sample out = apply_fog(s, 200.0, 0.8);
    for (int y = 1; y < 8; ++y) CHECK(out.image.at(y, 2, 1) == doctest::Approx(0.8).epsilon(1e-9));
  }
  SUBCASE("t = 0.5 mixes pixel and airlight equally") {
    // Row 7 of 8 has depth 1, so beta = ln 2 gives t = 0.5.
    const Sample out = apply_fog(s, std::log(2.0), 0.8);
    CHECK(out.image.at(7, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.image.at(0, 0, 0) == doctest::Approx(0.2).epsilon(1e-12));
  }
  CHECK(fog_depth(0, 8) == 0.0);
  CHECK(fog_depth(7, 8) == 1.0);
}

TEST_CASE("fog leaves annotations structurally equal for random samples and betas") {
  std::mt19937_64 rng(11);
  const ScenarioSpec spec = make_scenario(ScenarioName::kAdverseWeather);
  std::uniform_real_distribution<double> beta(0.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    const Sample s = generate_scene(rng(), spec.source, spec.size, spec.object_count);
    const Sample f = apply_fog(s, beta(rng), 0.85);
    CHECK(f.annotations == s.annotations);
    CHECK(f.image.in_unit_range());
  }
}

TEST_CASE("unpaired dataset sizes and disjoint seeds") {
  ScenarioSpec spec = make_scenario(ScenarioName::kSim2Real);
  const DatasetSamples d = generate_dataset_samples(spec, {10, 10, 5}, 4);
  CHECK(d.source_train.size() == 10);
  CHECK(d.target_train.size() == 10);
  CHECK(d.target_val.size() == 5);
  std::set<std::uint64_t> seeds;
  for (const auto* split : {&d.source_train, &d.target_train, &d.target_val})
    for (const Sample& s : *split) seeds.insert(s.scene_seed);
  CHECK(seeds.size() == 25);
}

TEST_CASE("paired fog multiplies target scenes by the number of levels") {
  const ScenarioSpec spec = make_scenario(ScenarioName::kAdverseWeather);
  REQUIRE(spec.paired);
  REQUIRE(spec.fog_levels.size() == 3);
  const DatasetSamples d = generate_dataset_samples(spec, {10, 10, 4}, 5);
  REQUIRE(d.target_train.size() == 30);
  for (const Sample& t : d.target_train) {
    const auto it = std::find_if(d.source_train.begin(), d.source_train.end(),
                                 [&](const Sample& s) { return s.scene_seed == t.scene_seed; });
    REQUIRE(it != d.source_train.end());
    CHECK(t.annotations == it->annotations);
    CHECK(t.domain == Domain::kTarget);
  }
  CHECK(d.target_val.size() == 4);
}

TEST_CASE("generated datasets on disk are reproducible") {
  testing::TempDir a("gen_a"), b("gen_b");
  const ScenarioSpec spec = make_scenario(ScenarioName::kCrossCamera);
  const DatasetPaths pa = generate_dataset(spec, {4, 3, 2}, 9, a.path());
  const DatasetPaths pb = generate_dataset(spec, {4, 3, 2}, 9, b.path());
  for (auto [x, y] : {std::pair{pa.source_train, pb.source_train}, std::pair{pa.target_train, pb.target_train},
                      std::pair{pa.target_val, pb.target_val}}) {
    const Manifest ma = read_manifest(x), mb = read_manifest(y);
    CHECK(ma.images == mb.images);
    CHECK(ma.annotations == mb.annotations);
    for (std::size_t i = 0; i < ma.size(); ++i) CHECK(read_png(ma.image_path(i)) == read_png(mb.image_path(i)));
  }
  CHECK(read_manifest(pa.target_train).annotation_count() == 0);
  CHECK(read_manifest(pa.target_train_labels).annotation_count() > 0);
}

TEST_CASE("every annotation of a 200-image corpus is a valid box") {
  int checked = 0;
  for (ScenarioName name : {ScenarioName::kSim2Real, ScenarioName::kAdverseWeather}) {
    const ScenarioSpec spec = make_scenario(name);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Sample s = generate_scene(seed, spec.target, spec.size, spec.object_count);
      CHECK(s.image.in_unit_range());
      for (const Annotation& a : s.annotations) {
        CHECK(a.box.is_valid(spec.size.height, spec.size.width));
        CHECK(a.class_id >= 0);
        CHECK(a.class_id < kNumClasses);
        CHECK(a.provenance == Provenance::kGroundTruth);
        CHECK_FALSE(a.score.has_value());
        CHECK_FALSE(a.class_logits.has_value());
        ++checked;
      }
    }
  }
  CHECK(checked >= 200);
}

TEST_CASE("manifest JSON round trip and PNG quantization") {
  testing::TempDir dir("manifest");
  const ScenarioSpec spec = make_scenario(ScenarioName::kSim2Real);
  std::vector<Sample> samples;
  for (std::uint64_t s = 0; s < 3; ++s) samples.push_back(generate_scene(s, spec.source, spec.size, spec.object_count));
  Manifest m = write_samples(samples, dir.path(), "x");
  m.annotations[0].push_back({{1, 2, 5, 6}, 1, Provenance::kPseudo, 0.7, std::vector<double>{0.1, 0.2, 0.3}});
  write_manifest(dir / "m.json", m);
  const Manifest r = read_manifest(dir / "m.json");
  CHECK(r.images == m.images);
  REQUIRE(r.annotations.size() == m.annotations.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    REQUIRE(r.annotations[i].size() == m.annotations[i].size());
    for (std::size_t k = 0; k < r.annotations[i].size(); ++k) {
      CHECK(r.annotations[i][k].class_id == m.annotations[i][k].class_id);
      CHECK(r.annotations[i][k].box.x_min == doctest::Approx(m.annotations[i][k].box.x_min).epsilon(1e-12));
      CHECK(r.annotations[i][k].box.y_max == doctest::Approx(m.annotations[i][k].box.y_max).epsilon(1e-12));
      CHECK(r.annotations[i][k].provenance == m.annotations[i][k].provenance);
    }
  }
  const Image back = read_png(r.image_path(0));
  const auto orig = samples[0].image.values();
  const auto got = back.values();
  for (std::size_t i = 0; i < orig.size(); ++i) CHECK(std::abs(orig[i] - got[i]) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("invalid scenario specs are config errors") {
  ScenarioSpec spec = make_scenario(ScenarioName::kAdverseWeather);
  spec.fog_levels.clear();
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  ScenarioSpec s2 = make_scenario(ScenarioName::kSim2Real);
  s2.object_count = {3, 1};
  CHECK_THROWS_AS(s2.validate(), ConfigError);
  CHECK_THROWS_AS(scenario_from_string("moon"), ConfigError);
  CHECK_THROWS_AS(read_manifest("/nonexistent/m.json"), DataError);
}
