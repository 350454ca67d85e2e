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

#include <filesystem>
#include <span>
#include <json.hpp>
#include <string>
#include <vector>

#include "udadet/manifest.hpp"
#include "udadet/soft_labels.hpp"
#include "udadet/types.hpp"

namespace udadet {

struct DetectorParams;
struct Detection;

enum class LabelMode { kHard, kSoft };
enum class ThresholdOn { kObjectness, kScore };  // score = objectness * class_prob

struct PseudoLabelConfig {
  double tau = 0.5;
  LabelMode label_mode = LabelMode::kHard;
  double temperature = 1.0;
  double alpha = 1.0;
  ThresholdOn threshold_on = ThresholdOn::kObjectness;
  double nms_iou = 0.5;

  /// alpha defaults to 1 for hard labels and 0.5 for soft labels.
  static PseudoLabelConfig with_mode(LabelMode mode);
  void validate() const;
};

nlohmann::json to_json(const PseudoLabelConfig& config);
PseudoLabelConfig pseudo_label_config_from_json(const nlohmann::json& json);

struct PseudoDataset {
  Manifest manifest;  // target images, pseudo annotations
  PseudoLabelConfig config;
  std::string teacher_checkpoint_hash;
  int kept_count = 0;
  int total_count = 0;  // post-NMS detections before thresholding
};

/// Post-NMS detections whose objectness (or score) reaches tau, as pseudo
/// annotations. Boxes that fall outside the image are dropped.
std::vector<Annotation> select_pseudo_labels(std::span<const Detection> post_nms, const PseudoLabelConfig& config,
                                             int image_height, int image_width);

/// Per-image pseudo labels from post-NMS detections that reach tau.
std::vector<Annotation> pseudo_labels_for(const DetectorParams& teacher, const Image& image,
                                          const PseudoLabelConfig& config, int* total_count = nullptr);

/// Labels every image of the target manifest. Its annotations are never read.
PseudoDataset generate_pseudo_labels(const DetectorParams& teacher, const Manifest& target,
                                     const PseudoLabelConfig& config, const std::string& teacher_checkpoint_hash);

/// Writes `<stem>.json` (manifest) and `<stem>.meta.json` (sidecar).
void write_pseudo_dataset(const std::filesystem::path& manifest_path, const PseudoDataset& dataset);
PseudoDataset read_pseudo_dataset(const std::filesystem::path& manifest_path);
std::filesystem::path sidecar_path(const std::filesystem::path& manifest_path);

/// Concatenates the labeled set and the pseudo-labeled set with fresh ids.
/// Every file path is made relative to `base_dir`.
Manifest build_student_dataset(const Manifest& labeled, const Manifest& pseudo, const std::filesystem::path& base_dir);

}  // namespace udadet
