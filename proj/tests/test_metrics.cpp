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

#include <Eigen/Dense>
#include <cmath>

#include "ap_oracle.hpp"
#include "test_util.hpp"
#include "udadet/detector.hpp"
#include "udadet/metrics.hpp"
#include "udadet/scenegen.hpp"

using namespace udadet;

namespace {

// Independent AP oracle: greedy matching in rank order, then precision and
// recall at every cutoff, then both interpolations from their definitions.
Detection mk(BoundingBox b, int cls, double score) {
  Detection d;
  d.box = b;
  d.class_id = cls;
  d.score = score;
  d.objectness = score;
  d.class_prob = 1.0;
  return d;
}

double ap(const std::vector<std::vector<Detection>>& d, const std::vector<std::vector<Annotation>>& g, ApMode m) {
  return *average_precision(d, g, 0.5, m).mean;
}

Eigen::MatrixXd random_psd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(n, n + 2);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
  return a * a.transpose() / (n + 2);
}

FeatureStats stats(Eigen::VectorXd mean, Eigen::MatrixXd cov) { return {std::move(mean), std::move(cov), 10}; }

}  // namespace

TEST_CASE("iou examples") {
  CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("ap examples") {
  const std::vector<std::vector<Annotation>> gt = {{{{0, 0, 10, 10}, 0}}};
  SUBCASE("one detection at IoU 0.6") {
    // [0,0,10,10] vs [0,0,10,6] -> 60/100.
    const std::vector<std::vector<Detection>> d = {{mk({0, 0, 10, 6}, 0, 0.9)}};
    CHECK(ap(d, gt, ApMode::kVoc11) == 1.0);
    CHECK(ap(d, gt, ApMode::kAllPoint) == 1.0);
  }
  SUBCASE("no detection overlaps enough") {
    const std::vector<std::vector<Detection>> d = {{mk({0, 0, 10, 4}, 0, 0.9), mk({20, 20, 30, 30}, 0, 0.5)}};
    CHECK(ap(d, gt, ApMode::kVoc11) == 0.0);
    CHECK(ap(d, gt, ApMode::kAllPoint) == 0.0);
  }
  SUBCASE("FP at 0.9 then TP at 0.8") {
    const std::vector<std::vector<Detection>> d = {{mk({30, 30, 40, 40}, 0, 0.9), mk({0, 0, 10, 10}, 0, 0.8)}};
    const testing::OracleAp o = testing::oracle_ap(d, gt, 0, 0.5);
    CHECK(o.allpoint == doctest::Approx(0.5));
    CHECK(o.voc11 == doctest::Approx(0.5));
    CHECK(ap(d, gt, ApMode::kAllPoint) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ap(d, gt, ApMode::kVoc11) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("ap modes diverge on a bundled case") {
  // Two objects; ranked TP, FP, TP.
  const std::vector<std::vector<Annotation>> gt = {{{{0, 0, 10, 10}, 1}, {{20, 20, 30, 30}, 1}}};
  const std::vector<std::vector<Detection>> d = {
      {mk({0, 0, 10, 10}, 1, 0.9), mk({40, 40, 50, 50}, 1, 0.8), mk({20, 20, 30, 30}, 1, 0.7)}};
  const double a = ap(d, gt, ApMode::kAllPoint), v = ap(d, gt, ApMode::kVoc11);
  CHECK(a == doctest::Approx(0.5 + 0.5 * 2.0 / 3.0).epsilon(1e-12));
  CHECK(v == doctest::Approx((6.0 + 5.0 * 2.0 / 3.0) / 11.0).epsilon(1e-12));
  CHECK(std::abs(a - v) > 0.01);
}

TEST_CASE("ap equals the brute-force oracle on random small instances") {
  std::mt19937_64 rng(97);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int images = 1 + int(rng() % 2);
    std::vector<std::vector<Detection>> d(images);
    std::vector<std::vector<Annotation>> g(images);
    const int ngt = 1 + int(rng() % 3), ndet = int(rng() % 6);
    for (int k = 0; k < ngt; ++k) g[rng() % images].push_back({testing::random_box(rng, 24.0, 4.0), int(rng() % 2)});
    for (int k = 0; k < ndet; ++k) {
      const std::size_t im = rng() % images;
      BoundingBox b = testing::random_box(rng, 24.0, 4.0);
      if (!g[im].empty() && u(rng) < 0.6) {
        b = g[im][rng() % g[im].size()].box;
        b.x_max += u(rng) * 4;
      }
      // Coarse scores so ties occur.
      d[im].push_back(mk(b, int(rng() % 2), std::round(u(rng) * 4) / 4));
    }
    for (ApMode mode : {ApMode::kVoc11, ApMode::kAllPoint}) {
      const ApResult r = average_precision(d, g, 0.5, mode);
      for (int c = 0; c < kNumClasses; ++c) {
        const bool has_gt = std::any_of(g.begin(), g.end(), [&](const auto& v) {
          return std::any_of(v.begin(), v.end(), [&](const Annotation& a) { return a.class_id == c; });
        });
        CHECK(r.per_class[c].has_value() == has_gt);
        if (!has_gt) continue;
        const testing::OracleAp o = testing::oracle_ap(d, g, c, 0.5);
        const double expect = mode == ApMode::kVoc11 ? o.voc11 : o.allpoint;
        CHECK(*r.per_class[c] == doctest::Approx(expect).epsilon(1e-12));
        ++compared;
      }
    }
  }
  CHECK(compared > 2000);
}

TEST_CASE("coverage") {
  CHECK(coverage(39.40, 46.60, 58.60) == doctest::Approx(0.3750).epsilon(1e-9));
  CHECK(coverage(33.48, 47.31, 47.56) == doctest::Approx(0.98224).epsilon(1e-4));
  CHECK(coverage(38.20, 43.90, 55.80) == doctest::Approx(0.32386).epsilon(1e-4));
  CHECK(coverage(30.0, 30.0, 50.0) == 0.0);
  CHECK_THROWS_AS(coverage(30.0, 40.0, 30.0), DataError);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int i = 0; i < 200; ++i) {
    const double b = u(rng), a = u(rng), o = b + 1.0 + u(rng);
    const double s = 0.01 + u(rng) / 10, c = u(rng) - 50;
    CHECK(std::abs(coverage(s * b + c, s * a + c, s * o + c) - coverage(b, a, o)) <= 1e-12);
  }
}

TEST_CASE("frechet distance closed forms") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd s = random_psd(5, rng);
  const Eigen::VectorXd m = Eigen::VectorXd::Random(5);
  CHECK(std::abs(frechet_distance(stats(m, s), stats(m, s))) <= 1e-8);

  Eigen::VectorXd d(3);
  d << 1.0, -2.0, 0.5;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
  CHECK(frechet_distance(stats(Eigen::VectorXd::Zero(3), id), stats(d, id)) ==
        doctest::Approx(d.squaredNorm()).epsilon(1e-10));

  const Eigen::MatrixXd four = Eigen::MatrixXd::Constant(1, 1, 4.0), one = Eigen::MatrixXd::Constant(1, 1, 1.0);
  CHECK(frechet_distance(stats(Eigen::VectorXd::Zero(1), four), stats(Eigen::VectorXd::Zero(1), one)) ==
        doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("frechet distance is symmetric, non-negative and zero only on equal inputs") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const int n = 1 + int(rng() % 6);
    const FeatureStats a = stats(Eigen::VectorXd::Random(n), random_psd(n, rng));
    const FeatureStats b = stats(Eigen::VectorXd::Random(n), random_psd(n, rng));
    const double ab = frechet_distance(a, b), ba = frechet_distance(b, a);
    CHECK(ab >= -1e-10);
    CHECK(std::abs(ab - ba) <= 1e-8 * std::max(1.0, ab));
    CHECK(std::abs(frechet_distance(a, a)) <= 1e-8);
    CHECK(ab > 1e-8);
  }
}

TEST_CASE("feature statistics") {
  const DetectorParams p = DetectorParams::initialize({}, 3);
  const ScenarioSpec spec = make_scenario(ScenarioName::kSim2Real);
  std::vector<Sample> samples;
  for (std::uint64_t s = 0; s < 20; ++s) samples.push_back(generate_scene(s, spec.target, spec.size, spec.object_count));

  SUBCASE("mean and covariance match a two-pass computation") {
    const FeatureStats fs = feature_stats(p, samples);
    std::vector<Eigen::VectorXd> f;
    for (const Sample& s : samples) f.push_back(pooled_features(p, s.image));
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(f[0].size());
    for (const auto& v : f) mean += v;
    mean /= double(f.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(mean.size(), mean.size());
    for (const auto& v : f) cov += (v - mean) * (v - mean).transpose();
    cov /= double(f.size() - 1);
    CHECK(fs.sample_count == 20);
    CHECK((fs.mean - mean).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((fs.covariance - cov).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("order does not matter") {
    std::vector<Sample> shuffled(samples.rbegin(), samples.rend());
    const FeatureStats a = feature_stats(p, samples), b = feature_stats(p, shuffled);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.covariance - b.covariance).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("identical images have zero covariance") {
    const std::vector<Sample> same(5, samples[0]);
    const FeatureStats a = feature_stats(p, same);
    CHECK(a.covariance.cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("evaluate reports both modes and excludes absent classes") {
  const DetectorParams p = DetectorParams::initialize({}, 3);
  const ScenarioSpec spec = make_scenario(ScenarioName::kSim2Real);
  std::vector<Sample> samples;
  for (std::uint64_t s = 0; s < 4; ++s) {
    Sample x = generate_scene(s, spec.target, spec.size, spec.object_count);
    std::erase_if(x.annotations, [](const Annotation& a) { return a.class_id == 2; });
    samples.push_back(x);
  }
  const EvalReport r = evaluate(p, samples, {}, false);
  CHECK(r.num_images == 4);
  CHECK_FALSE(r.ap_allpoint[2].has_value());
  CHECK(r.map_voc11.has_value());
  CHECK(r.map_allpoint.has_value());
  const EvalReport back = eval_report_from_json(to_json(r));
  CHECK(back.map_allpoint == r.map_allpoint);
  CHECK(back.gt_counts == r.gt_counts);
}
