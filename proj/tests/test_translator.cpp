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

#include "test_util.hpp"
#include "udadet/manifest.hpp"
#include "udadet/scenegen.hpp"
#include "udadet/translator.hpp"

using namespace udadet;

namespace {

struct Corpus {
  std::vector<Sample> source;
  std::vector<Image> source_images;
  std::vector<Image> target_images;
};

Corpus corpus(ScenarioName name, int n, std::uint64_t seed) {
  const ScenarioSpec spec = make_scenario(name);
  const DatasetSamples d = generate_dataset_samples(spec, {n, n, 1}, seed);
  Corpus c;
  c.source = d.source_train;
  for (const Sample& s : d.source_train) c.source_images.push_back(s.image);
  for (const Sample& s : d.target_train) c.target_images.push_back(s.image);
  return c;
}

std::array<double, 6> channel_moments(const Image& img) {
  std::array<double, 6> m{};
  const double n = double(img.height()) * img.width();
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) s += img.at(y, x, c);
    const double mean = s / n;
    double v = 0.0;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) v += (img.at(y, x, c) - mean) * (img.at(y, x, c) - mean);
    m[c] = mean;
    m[3 + c] = std::sqrt(v / n);
  }
  return m;
}

StyleCode random_style(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  StyleCode s;
  for (int c = 0; c < 3; ++c) {
    s.channel_means[c] = 0.2 + 0.6 * u(rng);
    s.channel_stds[c] = 0.02 + 0.3 * u(rng);
  }
  s.fog_beta = 3.0 * u(rng);
  s.gamma = 0.5 + 1.5 * u(rng);
  return s;
}

}  // namespace

TEST_CASE("fitted mean is the arithmetic mean of per-image statistics") {
  const Corpus c = corpus(ScenarioName::kSim2Real, 50, 3);
  const TranslatorModel m = fit_translator(c.source_images, c.target_images, TranslatorMode::kMultimodal);
  CHECK(m.target_count == 50);
  StatVector proxies = StatVector::Zero();
  std::array<double, 6> moments{};
  for (const Image& img : c.target_images) {
    const auto mm = channel_moments(img);
    for (int k = 0; k < 6; ++k) moments[k] += mm[k] / 50.0;
    proxies += image_stats(img) / 50.0;
  }
  for (int k = 0; k < 6; ++k) CHECK(std::abs(m.target_stat_mean[k] - moments[k]) <= 1e-6);
  CHECK(std::abs(m.target_stat_mean[6] - proxies[6]) <= 1e-6);
  CHECK(std::abs(m.target_stat_mean[7] - proxies[7]) <= 1e-6);
}

TEST_CASE("fit edge cases") {
  const Corpus c = corpus(ScenarioName::kCrossCamera, 6, 4);
  SUBCASE("target equal to source") {
    const TranslatorModel m = fit_translator(c.source_images, c.source_images, TranslatorMode::kDeterministic);
    CHECK((m.target_stat_mean - m.source_stat_mean).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("a single target image has zero covariance") {
    const std::vector<Image> one = {c.target_images[0]};
    const TranslatorModel m = fit_translator(c.source_images, one, TranslatorMode::kMultimodal);
    CHECK(m.target_stat_cov.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(fit_translator(c.source_images, std::vector<Image>{}, TranslatorMode::kMultimodal), ConfigError);
}

TEST_CASE("style sampling") {
  const Corpus c = corpus(ScenarioName::kAdverseWeather, 30, 5);
  TranslatorModel m = fit_translator(c.source_images, c.target_images, TranslatorMode::kDeterministic);

  SUBCASE("deterministic mode ignores the seed") {
    const StyleCode mean_style = style_from_stats(m, m.target_stat_mean);
    for (std::uint64_t s : {1u, 2u, 99u}) CHECK(sample_style(m, s) == mean_style);
  }
  SUBCASE("multimodal draws differ and centre on the fitted mean") {
    m.mode = TranslatorMode::kMultimodal;
    CHECK_FALSE(sample_style(m, 1) == sample_style(m, 2));
    const int n = 1000;
    std::array<double, 6> sum{};
    for (int i = 0; i < n; ++i) {
      const StyleCode s = sample_style(m, 1000 + i);
      CHECK(s.is_valid());
      for (int k = 0; k < 3; ++k) {
        sum[k] += s.channel_means[k];
        sum[3 + k] += s.channel_stds[k];
      }
    }
    for (int k = 0; k < 6; ++k) {
      const double se = std::sqrt(m.target_stat_cov(k, k) / n);
      INFO("coordinate " << k << " mean " << sum[k] / n << " fitted " << m.target_stat_mean[k] << " se " << se);
      CHECK(std::abs(sum[k] / n - m.target_stat_mean[k]) <= 3 * se);
    }
  }
}

TEST_CASE("translate preserves labels and keeps pixels in range") {
  const Corpus c = corpus(ScenarioName::kSim2Real, 10, 6);
  std::mt19937_64 rng(7);
  for (TranslatorMode mode : {TranslatorMode::kIdentity, TranslatorMode::kDeterministic, TranslatorMode::kMultimodal}) {
    const TranslatorModel m = fit_translator(c.source_images, c.target_images, mode);
    for (int i = 0; i < 30; ++i) {
      const Sample& s = c.source[i % c.source.size()];
      const StyleCode style = i % 2 ? random_style(rng) : sample_style(m, rng());
      const Sample out = translate(m, s, style);
      CHECK(out.annotations == s.annotations);
      CHECK(out.image.height() == s.image.height());
      CHECK(out.image.width() == s.image.width());
      CHECK(out.image.in_unit_range());
      CHECK(out.domain == Domain::kTranslated);
      if (mode == TranslatorMode::kIdentity) CHECK(out.image == s.image);
    }
  }
  Sample target = c.source[0];
  target.domain = Domain::kTarget;
  const TranslatorModel m = fit_translator(c.source_images, c.target_images, TranslatorMode::kMultimodal);
  CHECK_THROWS_AS(translate(m, target, StyleCode{}), ConfigError);
}

TEST_CASE("channel statistics of the output match the style when nothing clips") {
  const Corpus c = corpus(ScenarioName::kCrossCamera, 4, 8);
  const TranslatorModel m = fit_translator(c.source_images, c.target_images, TranslatorMode::kDeterministic);
  StyleCode style;
  style.channel_means = {0.45, 0.5, 0.55};
  style.channel_stds = {0.05, 0.06, 0.04};
  style.fog_beta = 0.0;
  style.gamma = 1.0;
  for (const Sample& s : c.source) {
    const Sample out = translate(m, s, style);
    const auto mm = channel_moments(out.image);
    for (int k = 0; k < 3; ++k) {
      CHECK(std::abs(mm[k] - style.channel_means[k]) <= 1e-3);
      CHECK(std::abs(mm[3 + k] - style.channel_stds[k]) <= 1e-3);
    }
  }
}

TEST_CASE("multimodal translation of one image with two seeds differs") {
  const Corpus c = corpus(ScenarioName::kAdverseWeather, 8, 9);
  const TranslatorModel m = fit_translator(c.source_images, c.target_images, TranslatorMode::kMultimodal);
  for (int trial = 0; trial < 100; ++trial) {
    const Sample& s = c.source[trial % c.source.size()];
    const Image a = translate(m, s, sample_style(m, style_seed(1, trial, 0))).image;
    const Image b = translate(m, s, sample_style(m, style_seed(1, trial, 1))).image;
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a.values()[i] - b.values()[i]);
    CHECK(diff > 0.0);
  }
}

TEST_CASE("translate_dataset") {
  testing::TempDir dir("translate");
  const ScenarioSpec spec = make_scenario(ScenarioName::kSim2Real);
  const DatasetPaths paths = generate_dataset(spec, {10, 6, 1}, 11, dir / "data");
  const Manifest source = read_manifest(paths.source_train);
  const Manifest target = read_manifest(paths.target_train);

  SUBCASE("identity with one style copies the set") {
    const TranslatorModel m = fit_translator(source, target, TranslatorMode::kIdentity);
    const Manifest out = translate_dataset(m, source, 1, 3, dir / "id");
    REQUIRE(out.size() == source.size());
    CHECK(out.annotations == source.annotations);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out.images[i].domain == Domain::kTranslated);
      CHECK(read_png(out.image_path(i)) == read_png(source.image_path(i)));
    }
  }
  SUBCASE("three styles triple the set, copies differ, labels repeat") {
    const TranslatorModel m = fit_translator(source, target, TranslatorMode::kMultimodal);
    const Manifest out = translate_dataset(m, source, 3, 3, dir / "mm");
    REQUIRE(out.size() == 30);
    const Manifest back = read_manifest(dir / "mm" / "translated.json");
    CHECK(back.images == out.images);
    for (std::size_t i = 0; i < out.size(); ++i) {
      REQUIRE(out.images[i].source_image_id.has_value());
      const int src = *out.images[i].source_image_id;
      const auto it = std::find_if(source.images.begin(), source.images.end(),
                                   [&](const ImageRecord& r) { return r.id == src; });
      REQUIRE(it != source.images.end());
      CHECK(out.annotations[i] == source.annotations[std::size_t(it - source.images.begin())]);
    }
    const Image a = read_png(out.image_path(0)), b = read_png(out.image_path(1));
    REQUIRE(out.images[0].source_image_id == out.images[1].source_image_id);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a.values()[i] - b.values()[i]);
    CHECK(diff / double(a.size()) > 0.0);
  }
}

TEST_CASE("translator model JSON round trip") {
  const Corpus c = corpus(ScenarioName::kSim2Real, 5, 12);
  const TranslatorModel m = fit_translator(c.source_images, c.target_images, TranslatorMode::kMultimodal);
  const TranslatorModel r = translator_model_from_json(to_json(m));
  CHECK(r.mode == m.mode);
  CHECK((r.target_stat_mean - m.target_stat_mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.target_stat_cov - m.target_stat_cov).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.atmospheric_light == m.atmospheric_light);
  CHECK_THROWS_AS(translator_mode_from_string("munit"), ConfigError);
}
