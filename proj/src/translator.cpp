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

#include "udadet/translator.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "udadet/error.hpp"
#include "udadet/hashing.hpp"
#include "udadet/image.hpp"
#include "udadet/scenegen.hpp"

namespace udadet {

using nlohmann::json;

namespace {

constexpr int kBandRows = 8;
constexpr int kMaxRejects = 100;

double luminance(const Image& image, int y, int x) {
  return 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) + 0.114 * image.at(y, x, 2);
}

json vector_json(const auto& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

std::string_view to_string(TranslatorMode mode) {
  switch (mode) {
    case TranslatorMode::kIdentity: return "identity";
    case TranslatorMode::kDeterministic: return "deterministic";
    case TranslatorMode::kMultimodal: return "multimodal";
  }
  return "identity";
}

TranslatorMode translator_mode_from_string(std::string_view name) {
  if (name == "identity") return TranslatorMode::kIdentity;
  if (name == "deterministic") return TranslatorMode::kDeterministic;
  if (name == "multimodal") return TranslatorMode::kMultimodal;
  throw ConfigError("unknown translator mode '" + std::string(name) + "'");
}

StatVector image_stats(const Image& image) {
  if (image.empty()) throw ConfigError("cannot compute statistics of an empty image");
  const int h = image.height();
  const int w = image.width();
  const double n = static_cast<double>(h) * w;
  StatVector s = StatVector::Zero();
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) sum += image.at(y, x, c);
    const double mean = sum / n;
    double sq = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) sq += (image.at(y, x, c) - mean) * (image.at(y, x, c) - mean);
    s[c] = mean;
    s[3 + c] = std::sqrt(sq / n);
  }

  // Least-squares slope of log band contrast against band depth.
  std::vector<double> depth, log_std;
  for (int y0 = 0; y0 + kBandRows <= h; y0 += kBandRows) {
    double sum = 0.0, sq = 0.0;
    for (int y = y0; y < y0 + kBandRows; ++y)
      for (int x = 0; x < w; ++x) sum += luminance(image, y, x);
    const double m = sum / (kBandRows * w);
    for (int y = y0; y < y0 + kBandRows; ++y)
      for (int x = 0; x < w; ++x) sq += (luminance(image, y, x) - m) * (luminance(image, y, x) - m);
    depth.push_back(fog_depth(y0, h) + 0.5 * (kBandRows - 1) / std::max(1, h - 1));
    log_std.push_back(std::log(std::sqrt(sq / (kBandRows * w)) + 1e-4));
  }
  if (depth.size() >= 2) {
    const double md = std::accumulate(depth.begin(), depth.end(), 0.0) / depth.size();
    const double ml = std::accumulate(log_std.begin(), log_std.end(), 0.0) / log_std.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < depth.size(); ++i) {
      num += (depth[i] - md) * (log_std[i] - ml);
      den += (depth[i] - md) * (depth[i] - md);
    }
    s[6] = den > 0.0 ? -num / den : 0.0;
  }

  std::vector<double> lum;
  lum.reserve(static_cast<std::size_t>(n));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) lum.push_back(luminance(image, y, x));
  auto mid = lum.begin() + static_cast<std::ptrdiff_t>(lum.size() / 2);
  std::nth_element(lum.begin(), mid, lum.end());
  const double median = std::clamp(*mid, 1e-3, 1.0 - 1e-3);
  s[7] = std::log(median) / std::log(0.5);
  return s;
}

bool StyleCode::is_valid() const {
  for (int c = 0; c < 3; ++c) {
    if (!(channel_means[c] >= 0.0 && channel_means[c] <= 1.0)) return false;
    if (!(channel_stds[c] > 0.0)) return false;
  }
  return fog_beta >= 0.0 && gamma > 0.0 && std::isfinite(fog_beta) && std::isfinite(gamma);
}

json to_json(const StyleCode& s) {
  return {{"channel_means", s.channel_means}, {"channel_stds", s.channel_stds}, {"fog_beta", s.fog_beta},
          {"gamma", s.gamma}};
}

json to_json(const TranslatorModel& m) {
  json cov = json::array();
  for (int r = 0; r < kStatDims; ++r) cov.push_back(vector_json(m.target_stat_cov.row(r)));
  return {{"mode", to_string(m.mode)},
          {"target_stat_mean", vector_json(m.target_stat_mean)},
          {"target_stat_cov", cov},
          {"source_stat_mean", vector_json(m.source_stat_mean)},
          {"atmospheric_light", m.atmospheric_light},
          {"target_count", m.target_count},
          {"source_count", m.source_count}};
}

TranslatorModel translator_model_from_json(const json& j) {
  try {
    TranslatorModel m;
    m.mode = translator_mode_from_string(j.at("mode").get<std::string>());
    for (int i = 0; i < kStatDims; ++i) {
      m.target_stat_mean[i] = j.at("target_stat_mean").at(i).get<double>();
      m.source_stat_mean[i] = j.at("source_stat_mean").at(i).get<double>();
      for (int k = 0; k < kStatDims; ++k) m.target_stat_cov(i, k) = j.at("target_stat_cov").at(i).at(k).get<double>();
    }
    m.atmospheric_light = j.at("atmospheric_light").get<double>();
    m.target_count = j.at("target_count").get<std::size_t>();
    m.source_count = j.at("source_count").get<std::size_t>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed translator model: ") + e.what());
  }
}

TranslatorModel fit_translator(std::span<const Image> source, std::span<const Image> target, TranslatorMode mode) {
  if (source.empty() || target.empty()) throw ConfigError("translator fitting needs nonempty source and target sets");
  TranslatorModel m;
  m.mode = mode;
  m.source_count = source.size();
  m.target_count = target.size();

  for (const Image& img : source) m.source_stat_mean += image_stats(img);
  m.source_stat_mean /= static_cast<double>(source.size());

  std::vector<StatVector> stats;
  stats.reserve(target.size());
  double light = 0.0;
  for (const Image& img : target) {
    stats.push_back(image_stats(img));
    m.target_stat_mean += stats.back();
    // Bottom band: the most distant rows, closest to the airlight.
    const int h = img.height();
    const int y0 = std::max(0, h - kBandRows);
    double sum = 0.0;
    for (int y = y0; y < h; ++y)
      for (int x = 0; x < img.width(); ++x) sum += luminance(img, y, x);
    light += sum / ((h - y0) * img.width());
  }
  m.target_stat_mean /= static_cast<double>(target.size());
  m.atmospheric_light = std::clamp(light / target.size(), 0.0, 1.0);
  if (target.size() > 1) {
    for (const StatVector& s : stats) m.target_stat_cov += (s - m.target_stat_mean) * (s - m.target_stat_mean).transpose();
    m.target_stat_cov /= static_cast<double>(target.size() - 1);
    m.target_stat_cov = (0.5 * (m.target_stat_cov + m.target_stat_cov.transpose())).eval();
  }
  return m;
}

TranslatorModel fit_translator(const Manifest& source, const Manifest& target, TranslatorMode mode) {
  if (source.empty() || target.empty()) throw ConfigError("translator fitting needs nonempty source and target sets");
  auto read_all = [](const Manifest& m) {
    std::vector<Image> images;
    images.reserve(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) images.push_back(read_png(m.image_path(i)));
    return images;
  };
  const auto s = read_all(source);
  const auto t = read_all(target);
  return fit_translator(s, t, mode);
}

StyleCode style_from_stats(const TranslatorModel& model, const StatVector& stats) {
  StyleCode style;
  for (int c = 0; c < 3; ++c) {
    style.channel_means[c] = stats[c];
    style.channel_stds[c] = stats[3 + c];
  }
  style.fog_beta = std::max(0.0, stats[6] - model.source_stat_mean[6]);
  const double source_gamma = model.source_stat_mean[7];
  style.gamma = source_gamma > 0.0 ? stats[7] / source_gamma : 1.0;
  return style;
}

StyleCode sample_style(const TranslatorModel& model, std::uint64_t seed) {
  switch (model.mode) {
    case TranslatorMode::kIdentity: {
      StyleCode neutral = style_from_stats(model, model.source_stat_mean);
      neutral.fog_beta = 0.0;
      neutral.gamma = 1.0;
      return neutral;
    }
    case TranslatorMode::kDeterministic: return style_from_stats(model, model.target_stat_mean);
    case TranslatorMode::kMultimodal: break;
  }

  Eigen::SelfAdjointEigenSolver<StatMatrix> eig(model.target_stat_cov);
  const StatVector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const StatMatrix transform = eig.eigenvectors() * root.asDiagonal();
  std::mt19937_64 rng(mix_seed(seed, 0x5157));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto in_range = [](const StatVector& s) {
    for (int c = 0; c < 3; ++c)
      if (s[c] < 0.0 || s[c] > 1.0 || s[3 + c] <= 0.0) return false;
    return s[7] > 0.0;
  };
  StatVector draw;
  for (int attempt = 0; attempt <= kMaxRejects; ++attempt) {
    StatVector z;
    for (int i = 0; i < kStatDims; ++i) z[i] = normal(rng);
    draw = model.target_stat_mean + transform * z;
    if (in_range(draw)) return style_from_stats(model, draw);
  }
  for (int c = 0; c < 3; ++c) {
    draw[c] = std::clamp(draw[c], 0.0, 1.0);
    draw[3 + c] = std::max(draw[3 + c], 1e-3);
  }
  draw[7] = std::max(draw[7], 1e-3);
  return style_from_stats(model, draw);
}

Sample translate(const TranslatorModel& model, const Sample& sample, const StyleCode& style) {
  if (sample.domain != Domain::kSource) throw ConfigError("only source samples can be translated");
  Sample out = sample;
  out.domain = Domain::kTranslated;
  if (model.mode == TranslatorMode::kIdentity) return out;

  Image& img = out.image;
  if (style.gamma != 1.0) {
    for (double& v : img.values()) v = std::pow(std::max(v, 0.0), style.gamma);
  }
  if (style.fog_beta > 0.0) {
    out.image = apply_fog(out, style.fog_beta, model.atmospheric_light).image;
  }

  const int h = img.height();
  const int w = img.width();
  const double n = static_cast<double>(h) * w;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0, sq = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) sum += img.at(y, x, c);
    const double mean = sum / n;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) sq += (img.at(y, x, c) - mean) * (img.at(y, x, c) - mean);
    const double sd = std::sqrt(sq / n);
    const double gain = sd > 1e-12 ? style.channel_stds[c] / sd : 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double& v = img.at(y, x, c);
        v = (v - mean) * gain + style.channel_means[c];
      }
  }
  img.clip();
  return out;
}

std::uint64_t style_seed(std::uint64_t seed, int source_image_id, int k) {
  return mix_seed(mix_seed(seed, static_cast<std::uint64_t>(source_image_id)), static_cast<std::uint64_t>(k));
}

Manifest translate_dataset(const TranslatorModel& model, const Manifest& source, int styles_per_image,
                           std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (styles_per_image < 1) throw ConfigError("styles_per_image must be >= 1");
  const auto samples = load_samples(source, true);
  std::vector<Sample> translated;
  std::vector<int> source_ids;
  translated.reserve(samples.size() * styles_per_image);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (int k = 0; k < styles_per_image; ++k) {
      const StyleCode style = sample_style(model, style_seed(seed, source.images[i].id, k));
      translated.push_back(translate(model, samples[i], style));
      source_ids.push_back(source.images[i].id);
    }
  }
  Manifest out = write_samples(translated, out_dir, "translated");
  for (std::size_t i = 0; i < out.size(); ++i) out.images[i].source_image_id = source_ids[i];
  write_manifest(out_dir / "translated.json", out);
  return out;
}

}  // namespace udadet
