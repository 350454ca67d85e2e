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

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <span>

#include "udadet/manifest.hpp"
#include "udadet/types.hpp"

namespace udadet {

inline constexpr int kStatDims = 8;
using StatVector = Eigen::Matrix<double, kStatDims, 1>;
using StatMatrix = Eigen::Matrix<double, kStatDims, kStatDims>;

enum class TranslatorMode { kIdentity, kDeterministic, kMultimodal };

std::string_view to_string(TranslatorMode mode);
TranslatorMode translator_mode_from_string(std::string_view name);

/// Per-image appearance statistics:
///   [0..2] channel means, [3..5] channel stds (population),
///   [6] fog proxy: minus the slope of log(luminance std) over 8-row bands
///       against normalized depth, i.e. how fast contrast decays downwards,
///   [7] gamma proxy: ln(median luminance) / ln(0.5).
StatVector image_stats(const Image& image);

struct StyleCode {
  std::array<double, 3> channel_means{0.5, 0.5, 0.5};
  std::array<double, 3> channel_stds{0.25, 0.25, 0.25};
  double fog_beta = 0.0;
  double gamma = 1.0;

  bool is_valid() const;
  bool operator==(const StyleCode&) const = default;
};

nlohmann::json to_json(const StyleCode& style);

struct TranslatorModel {
  TranslatorMode mode = TranslatorMode::kMultimodal;
  StatVector target_stat_mean = StatVector::Zero();
  StatMatrix target_stat_cov = StatMatrix::Zero();
  StatVector source_stat_mean = StatVector::Zero();
  double atmospheric_light = 0.8;  // estimated from the lowest band of target images
  std::size_t target_count = 0;
  std::size_t source_count = 0;
};

nlohmann::json to_json(const TranslatorModel& model);
TranslatorModel translator_model_from_json(const nlohmann::json& json);

/// Mean and unbiased covariance of target image statistics plus the source
/// reference statistics. Only pixels are read.
TranslatorModel fit_translator(std::span<const Image> source, std::span<const Image> target, TranslatorMode mode);
TranslatorModel fit_translator(const Manifest& source, const Manifest& target, TranslatorMode mode);

/// Converts a statistics vector into the style that maps the source
/// reference appearance onto it.
StyleCode style_from_stats(const TranslatorModel& model, const StatVector& stats);

StyleCode sample_style(const TranslatorModel& model, std::uint64_t seed);

/// gamma -> fog -> per-channel renormalization -> clip. Geometry and
/// annotations are untouched.
Sample translate(const TranslatorModel& model, const Sample& sample, const StyleCode& style);

/// Style seed for copy k of a source image.
std::uint64_t style_seed(std::uint64_t seed, int source_image_id, int k);

/// Writes `styles_per_image` translations of every source image under
/// `out_dir` and returns the manifest (also written to `out_dir/translated.json`).
Manifest translate_dataset(const TranslatorModel& model, const Manifest& source, int styles_per_image,
                           std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace udadet
