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

#include "udadet/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <iostream>

#include "udadet/detector.hpp"
#include "udadet/error.hpp"

namespace udadet {

using nlohmann::json;

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

struct RankedDetection {
  std::size_t image = 0;
  const Detection* detection = nullptr;
  int id = 0;
};

double ap_from_curve(const std::vector<double>& recall, const std::vector<double>& precision, ApMode mode) {
  if (mode == ApMode::kVoc11) {
    double total = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double threshold = i / 10.0;
      double best = 0.0;
      for (std::size_t k = 0; k < recall.size(); ++k)
        if (recall[k] >= threshold) best = std::max(best, precision[k]);
      total += best;
    }
    return total / 11.0;
  }
  // Area under the monotone precision envelope.
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double area = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) area += (mrec[i] - mrec[i - 1]) * mpre[i];
  return area;
}

}  // namespace

ApResult average_precision(std::span<const std::vector<Detection>> detections,
                           std::span<const std::vector<Annotation>> ground_truth, double iou_threshold,
                           ApMode mode) {
  if (detections.size() != ground_truth.size()) {
    throw ConfigError("detections and ground truth cover different numbers of images");
  }
  ApResult result;
  double sum = 0.0;
  int classes_with_gt = 0;
  for (int cls = 0; cls < kNumClasses; ++cls) {
    int npos = 0;
    for (const auto& list : ground_truth)
      for (const Annotation& a : list) npos += a.class_id == cls ? 1 : 0;
    result.gt_counts[cls] = npos;

    std::vector<RankedDetection> ranked;
    int id = 0;
    for (std::size_t img = 0; img < detections.size(); ++img) {
      for (const Detection& d : detections[img]) {
        if (d.class_id == cls) ranked.push_back({img, &d, id});
        ++id;
      }
    }
    result.detection_counts[cls] = static_cast<int>(ranked.size());
    if (npos == 0) continue;

    std::sort(ranked.begin(), ranked.end(), [](const RankedDetection& a, const RankedDetection& b) {
      if (a.detection->score != b.detection->score) return a.detection->score > b.detection->score;
      return a.id < b.id;
    });

    std::vector<std::vector<bool>> matched(ground_truth.size());
    for (std::size_t img = 0; img < ground_truth.size(); ++img) matched[img].assign(ground_truth[img].size(), false);

    std::vector<double> recall, precision;
    int tp = 0, fp = 0;
    for (const RankedDetection& r : ranked) {
      const auto& gts = ground_truth[r.image];
      double best = -1.0;
      std::size_t best_index = 0;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].class_id != cls || matched[r.image][g]) continue;
        const double overlap = iou(r.detection->box, gts[g].box);
        if (overlap > best) {
          best = overlap;
          best_index = g;
        }
      }
      if (best >= iou_threshold) {
        matched[r.image][best_index] = true;
        ++tp;
      } else {
        ++fp;
      }
      recall.push_back(static_cast<double>(tp) / npos);
      precision.push_back(static_cast<double>(tp) / (tp + fp));
    }
    const double ap = ap_from_curve(recall, precision, mode);
    result.per_class[cls] = ap;
    sum += ap;
    ++classes_with_gt;
  }
  if (classes_with_gt > 0) result.mean = sum / classes_with_gt;
  return result;
}

double coverage(double map_baseline, double map_adapted, double map_oracle) {
  if (map_oracle == map_baseline) {
    throw DataError("coverage is undefined when the oracle and baseline mAP are equal");
  }
  return (map_adapted - map_baseline) / (map_oracle - map_baseline);
}

json to_json(const EvalConfig& c) {
  return {{"objectness_floor", c.objectness_floor},
          {"nms_iou", c.nms_iou},
          {"max_detections", c.max_detections},
          {"iou_threshold", c.iou_threshold}};
}

EvalConfig eval_config_from_json(const json& j) {
  EvalConfig c;
  c.objectness_floor = j.value("objectness_floor", c.objectness_floor);
  c.nms_iou = j.value("nms_iou", c.nms_iou);
  c.max_detections = j.value("max_detections", c.max_detections);
  c.iou_threshold = j.value("iou_threshold", c.iou_threshold);
  if (c.max_detections < 1) throw ConfigError("max_detections must be >= 1");
  return c;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> optional_from(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

}  // namespace

json to_json(const EvalReport& r) {
  json per_class = json::array();
  for (int c = 0; c < kNumClasses; ++c) {
    per_class.push_back({{"class", kClassNames[c]},
                         {"gt_count", r.gt_counts[c]},
                         {"ap50_voc11", optional_json(r.ap_voc11[c])},
                         {"ap50_allpoint", optional_json(r.ap_allpoint[c])}});
  }
  return {{"per_class", per_class},
          {"map50_voc11", optional_json(r.map_voc11)},
          {"map50_allpoint", optional_json(r.map_allpoint)},
          {"num_detections", r.num_detections},
          {"num_images", r.num_images},
          {"metadata", r.metadata}};
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  const auto& per_class = j.at("per_class");
  for (int c = 0; c < kNumClasses; ++c) {
    r.gt_counts[c] = per_class.at(c).at("gt_count").get<int>();
    r.ap_voc11[c] = optional_from(per_class.at(c).at("ap50_voc11"));
    r.ap_allpoint[c] = optional_from(per_class.at(c).at("ap50_allpoint"));
  }
  r.map_voc11 = optional_from(j.at("map50_voc11"));
  r.map_allpoint = optional_from(j.at("map50_allpoint"));
  r.num_detections = j.at("num_detections").get<int>();
  r.num_images = j.at("num_images").get<int>();
  r.metadata = j.value("metadata", json::object());
  return r;
}

std::vector<std::vector<Detection>> detect(const DetectorParams& params, std::span<const Sample> samples,
                                           const EvalConfig& config) {
  std::vector<std::vector<Detection>> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    auto kept = nms(decode(forward(params, s.image).prediction, config.objectness_floor), config.nms_iou);
    if (kept.size() > static_cast<std::size_t>(config.max_detections)) kept.resize(config.max_detections);
    out.push_back(std::move(kept));
  }
  return out;
}

EvalReport evaluate(const DetectorParams& params, std::span<const Sample> samples, const EvalConfig& config,
                    bool allpoint_only) {
  const auto detections = detect(params, samples, config);
  std::vector<std::vector<Annotation>> gts;
  gts.reserve(samples.size());
  for (const Sample& s : samples) gts.push_back(s.annotations);

  EvalReport report;
  report.num_images = static_cast<int>(samples.size());
  for (const auto& d : detections) report.num_detections += static_cast<int>(d.size());
  const ApResult allpoint = average_precision(detections, gts, config.iou_threshold, ApMode::kAllPoint);
  report.ap_allpoint = allpoint.per_class;
  report.map_allpoint = allpoint.mean;
  report.gt_counts = allpoint.gt_counts;
  if (!allpoint_only) {
    const ApResult voc = average_precision(detections, gts, config.iou_threshold, ApMode::kVoc11);
    report.ap_voc11 = voc.per_class;
    report.map_voc11 = voc.mean;
  }
  json excluded = json::array();
  for (int c = 0; c < kNumClasses; ++c)
    if (report.gt_counts[c] == 0) excluded.push_back(kClassNames[c]);
  report.metadata = {{"iou_threshold", config.iou_threshold},
                     {"max_detections_per_image", config.max_detections},
                     {"classes_excluded_from_map", excluded}};
  return report;
}

Eigen::VectorXd pooled_features(const DetectorParams& params, const Image& image) {
  const FeatureMap features = forward(params, image).features;
  const int c = features.channels();
  const int cells = features.height() * features.width();
  Eigen::VectorXd pooled(c);
  for (int i = 0; i < c; ++i) {
    double acc = 0.0;
    for (int j = 0; j < cells; ++j) acc += features.values.values[static_cast<std::size_t>(i) * cells + j];
    pooled[i] = acc / cells;
  }
  return pooled;
}

FeatureStats feature_stats(const DetectorParams& params, std::span<const Sample> samples) {
  if (samples.empty()) throw ConfigError("feature statistics need at least one image");
  const int c = params.config.feature_channels();
  FeatureStats stats;
  stats.mean = Eigen::VectorXd::Zero(c);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(c, c);
  for (const Sample& s : samples) {
    const Eigen::VectorXd x = pooled_features(params, s.image);
    ++stats.sample_count;
    const Eigen::VectorXd delta = x - stats.mean;
    stats.mean += delta / static_cast<double>(stats.sample_count);
    m2 += delta * (x - stats.mean).transpose();
  }
  if (stats.sample_count < 2) {
    std::cerr << "warning: feature statistics over a single image; covariance set to zero\n";
    stats.covariance = Eigen::MatrixXd::Zero(c, c);
  } else {
    stats.covariance = m2 / static_cast<double>(stats.sample_count - 1);
    stats.covariance = 0.5 * (stats.covariance + stats.covariance.transpose()).eval();
  }
  return stats;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  Eigen::VectorXd values = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  if (a.mean.size() != b.mean.size() || a.covariance.rows() != b.covariance.rows() ||
      a.covariance.rows() != a.mean.size()) {
    throw ConfigError("feature statistics have mismatched dimensions");
  }
  const Eigen::MatrixXd root_a = psd_sqrt(a.covariance);
  const Eigen::MatrixXd inner = root_a * b.covariance * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  double trace_sqrt = 0.0;
  for (double lambda : eig.eigenvalues()) {
    if (lambda < -1e-6) std::cerr << "warning: covariance product has eigenvalue " << lambda << "\n";
    trace_sqrt += std::sqrt(std::max(lambda, 0.0));
  }
  const double d2 = (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() - 2.0 * trace_sqrt;
  return std::max(d2, 0.0);
}

}  // namespace udadet
