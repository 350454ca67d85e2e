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
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "udadet/types.hpp"

namespace udadet {

struct DetectorParams;
struct Detection;

/// Intersection over union; 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

enum class ApMode { kVoc11, kAllPoint };

struct ApResult {
  std::array<std::optional<double>, kNumClasses> per_class;  // nullopt: class has no ground truth
  std::optional<double> mean;                                 // over classes with ground truth
  std::array<int, kNumClasses> gt_counts{};
  std::array<int, kNumClasses> detection_counts{};
};

/// Per-class AP. Detections are ranked by descending score with ties broken
/// by ascending detection id (image order, then position within the image);
/// each detection is matched to the best-overlapping unmatched ground truth of
/// its class and counts as a true positive iff that IoU reaches the threshold.
ApResult average_precision(std::span<const std::vector<Detection>> detections,
                           std::span<const std::vector<Annotation>> ground_truth, double iou_threshold,
                           ApMode mode);

/// Fraction of the baseline-to-oracle gap closed by the adapted model.
double coverage(double map_baseline, double map_adapted, double map_oracle);

// ---------------------------------------------------------------------------
// Evaluation of a detector on a labeled split
// ---------------------------------------------------------------------------

struct EvalConfig {
  double objectness_floor = 0.01;
  double nms_iou = 0.5;
  int max_detections = 100;  // per image
  double iou_threshold = 0.5;
};

nlohmann::json to_json(const EvalConfig& config);
EvalConfig eval_config_from_json(const nlohmann::json& json);

struct EvalReport {
  std::array<std::optional<double>, kNumClasses> ap_voc11;
  std::array<std::optional<double>, kNumClasses> ap_allpoint;
  std::optional<double> map_voc11;
  std::optional<double> map_allpoint;
  std::array<int, kNumClasses> gt_counts{};
  int num_detections = 0;
  int num_images = 0;
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& json);

/// decode -> NMS -> top-k for every image.
std::vector<std::vector<Detection>> detect(const DetectorParams& params, std::span<const Sample> samples,
                                           const EvalConfig& config);

EvalReport evaluate(const DetectorParams& params, std::span<const Sample> samples, const EvalConfig& config,
                    bool allpoint_only = false);

// ---------------------------------------------------------------------------
// Frechet distance between feature distributions
// ---------------------------------------------------------------------------

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // unbiased (n - 1)
  std::size_t sample_count = 0;
};

/// Globally average-pooled backbone features of one image.
Eigen::VectorXd pooled_features(const DetectorParams& params, const Image& image);

/// Single-pass (Welford) mean and covariance over the images.
FeatureStats feature_stats(const DetectorParams& params, std::span<const Sample> samples);

/// Squared Frechet distance |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

}  // namespace udadet
