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

#include <array>
#include <cstdint>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "udadet/layers.hpp"
#include "udadet/types.hpp"

namespace udadet {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct ConvLayer {
  Tensor weight;  // [out, in * 9]
  Tensor bias;    // [out]
  int stride = 1;
  bool operator==(const ConvLayer&) const = default;
};

struct DenseLayer {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
  bool operator==(const DenseLayer&) const = default;
};

struct DetectorConfig {
  std::array<int, 4> widths{32, 32, 64, 64};
  std::array<int, 4> strides{2, 2, 2, 1};
  int num_classes = kNumClasses;
  double init_std = 0.05;
  // When > 0, backbone stages use std = fan_in_gain / sqrt(fan_in) instead of
  // init_std; heads always use init_std.
  double fan_in_gain = 1.6;
  double input_offset = 0.5;  // subtracted from every pixel before the first stage

  int total_stride() const { return strides[0] * strides[1] * strides[2] * strides[3]; }
  int feature_channels() const { return widths[3]; }
  void validate() const;
  bool operator==(const DetectorConfig&) const = default;
};

nlohmann::json to_json(const DetectorConfig& config);
DetectorConfig detector_config_from_json(const nlohmann::json& json);

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

struct ConstParamRef {
  std::string name;
  const Tensor* tensor;
};

/// Feature extractor (phi.*: four 3x3 conv stages with SiLU) and three 1x1
/// heads (psi.*: objectness, class logits, box edge offsets).
struct DetectorParams {
  DetectorConfig config;
  std::array<ConvLayer, 4> stages;
  DenseLayer objectness;
  DenseLayer classes;
  DenseLayer boxes;

  static DetectorParams zeros(const DetectorConfig& config);
  /// Truncated-normal weights, zero biases.
  static DetectorParams initialize(const DetectorConfig& config, std::uint64_t seed);

  std::vector<ParamRef> named();
  std::vector<ConstParamRef> named() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  bool operator==(const DetectorParams&) const = default;
};

inline bool is_backbone_param(const std::string& name) { return name.rfind("phi.", 0) == 0; }

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct FeatureMap {
  Tensor values;  // [C, H', W']
  int stride = 8;

  int channels() const { return values.shape.at(0); }
  int height() const { return values.shape.at(1); }
  int width() const { return values.shape.at(2); }
};

/// Per-cell head outputs; planes are stored as [plane][cell].
struct RawPrediction {
  int grid_height = 0;
  int grid_width = 0;
  int num_classes = kNumClasses;
  int stride = 8;
  AlignedDoubles objectness_logits;  // [H'W']
  AlignedDoubles class_logits;       // [K][H'W']
  AlignedDoubles box_deltas;         // [4][H'W'] left, top, right, bottom in stride units

  int cells() const { return grid_height * grid_width; }
  int image_height() const { return grid_height * stride; }
  int image_width() const { return grid_width * stride; }
  static RawPrediction zeros(int grid_height, int grid_width, int num_classes, int stride);
};

struct ForwardCache {
  AlignedDoubles input;  // CHW, offset applied
  std::array<layers::ConvGeometry, 4> geometry;
  std::array<Tensor, 4> cols;
  std::array<Tensor, 4> preactivations;
};

struct ForwardResult {
  FeatureMap features;
  RawPrediction prediction;
  ForwardCache cache;
};

ForwardResult forward(const DetectorParams& params, const Image& image);

/// Accumulates parameter gradients into `grads`. Either upstream term may be
/// null. `d_features` is added to the gradient flowing out of the heads, which
/// is where the gradient reversal path enters the backbone. `d_image`, when
/// given, receives the input gradient in the Image's HWC layout.
void backward(const DetectorParams& params, const ForwardResult& result, const RawPrediction* d_prediction,
              const Tensor* d_features, DetectorParams& grads, AlignedDoubles* d_image = nullptr);

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

struct LossOptions {
  double objectness_weight = 1.0;
  double negative_weight = 0.25;  // objectness BCE weight of cells without an object
  double classification_weight = 1.0;
  double box_weight = 1.0;
  double smooth_l1_beta = 0.1;
  // Applied only to pseudo annotations that carry class logits.
  double soft_alpha = 1.0;
  double soft_temperature = 1.0;
};

nlohmann::json to_json(const LossOptions& options);
LossOptions loss_options_from_json(const nlohmann::json& json);

struct LossComponents {
  double objectness = 0.0;
  double classification = 0.0;
  double box = 0.0;
  double total = 0.0;  // weighted sum
};

struct CellAssignment {
  int cell = 0;
  std::size_t annotation = 0;
};

/// One positive cell per box: the cell holding the box center. When two boxes
/// share a cell the larger one wins.
std::vector<CellAssignment> assign_cells(std::span<const Annotation> annotations, int grid_height, int grid_width,
                                         int stride);

std::array<double, 4> encode_box(const BoundingBox& box, int cell_x, int cell_y, int stride);
BoundingBox decode_box(const std::array<double, 4>& deltas, int cell_x, int cell_y, int stride);

/// Objectness BCE over all cells plus class cross-entropy and smooth-L1 box
/// loss over positive cells, each normalized by max(1, #positives). When
/// `grad` is non-null it receives d(total)/d(prediction).
LossComponents detection_loss(const RawPrediction& prediction, std::span<const Annotation> annotations,
                              const LossOptions& options = {}, RawPrediction* grad = nullptr);

struct SupervisedGradients {
  DetectorParams grads;
  LossComponents loss;
};

SupervisedGradients supervised_gradients(const DetectorParams& params, const Sample& sample,
                                         const LossOptions& options);

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

struct Detection {
  BoundingBox box;
  int class_id = 0;
  double objectness = 0.0;
  double class_prob = 0.0;
  double score = 0.0;  // objectness * class_prob
  int cell = -1;
  std::vector<double> class_logits;
};

/// One candidate per cell whose objectness probability reaches the floor.
std::vector<Detection> decode(const RawPrediction& prediction, double objectness_floor);

/// Greedy class-agnostic suppression by descending score; a candidate is
/// dropped when its IoU with a kept box exceeds the threshold.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

}  // namespace udadet
