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

#include "udadet/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

#include "udadet/detector.hpp"
#include "udadet/error.hpp"
#include "udadet/image.hpp"

namespace udadet {

using nlohmann::json;

std::vector<double> soft_distribution(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("soft-label temperature must be positive");
  if (logits.empty()) return {};
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - top) / temperature);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double mixed_classification_loss(std::span<const double> q, std::span<const double> p, std::span<const double> p_hat,
                                 double alpha) {
  if (q.size() != p.size() || q.size() != p_hat.size()) {
    throw ConfigError("class distributions have mismatched lengths");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    // alpha == 1 must reproduce the hard cross-entropy exactly, so the soft
    // term is skipped rather than multiplied by zero.
    const double weight = alpha == 1.0 ? p[i] : alpha * p[i] + (1.0 - alpha) * p_hat[i];
    if (weight == 0.0) continue;
    double qi = q[i];
    if (qi < 1e-12) {
      std::cerr << "warning: predicted class probability " << qi << " clamped to 1e-12\n";
      qi = 1e-12;
    }
    loss -= weight * std::log(qi);
  }
  return loss;
}

PseudoLabelConfig PseudoLabelConfig::with_mode(LabelMode mode) {
  PseudoLabelConfig c;
  c.label_mode = mode;
  c.alpha = mode == LabelMode::kHard ? 1.0 : 0.5;
  return c;
}

void PseudoLabelConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("pseudo-label tau must lie in [0, 1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("pseudo-label alpha must lie in [0, 1]");
  if (!(temperature > 0.0)) throw ConfigError("pseudo-label temperature must be positive");
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) throw ConfigError("pseudo-label nms_iou must lie in [0, 1]");
  if (alpha == 0.0) {
    std::cerr << "warning: alpha = 0 trains on soft labels only, which tends to collapse accuracy\n";
  }
}

json to_json(const PseudoLabelConfig& c) {
  return {{"tau", c.tau},
          {"label_mode", c.label_mode == LabelMode::kHard ? "hard" : "soft"},
          {"temperature", c.temperature},
          {"alpha", c.alpha},
          {"threshold_on", c.threshold_on == ThresholdOn::kObjectness ? "objectness" : "score"},
          {"nms_iou", c.nms_iou}};
}

PseudoLabelConfig pseudo_label_config_from_json(const json& j) {
  try {
    const std::string mode = j.value("label_mode", std::string("hard"));
    if (mode != "hard" && mode != "soft") throw ConfigError("label_mode must be 'hard' or 'soft'");
    PseudoLabelConfig c = PseudoLabelConfig::with_mode(mode == "hard" ? LabelMode::kHard : LabelMode::kSoft);
    c.tau = j.value("tau", c.tau);
    c.temperature = j.value("temperature", c.temperature);
    c.alpha = j.value("alpha", c.alpha);
    c.nms_iou = j.value("nms_iou", c.nms_iou);
    const std::string on = j.value("threshold_on", std::string("objectness"));
    if (on == "objectness") {
      c.threshold_on = ThresholdOn::kObjectness;
    } else if (on == "score") {
      c.threshold_on = ThresholdOn::kScore;
    } else {
      throw ConfigError("threshold_on must be 'objectness' or 'score'");
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad pseudo-label config: ") + e.what());
  }
}

std::vector<Annotation> select_pseudo_labels(std::span<const Detection> post_nms, const PseudoLabelConfig& config,
                                             int image_height, int image_width) {
  std::vector<Annotation> kept;
  for (const Detection& d : post_nms) {
    const double value = config.threshold_on == ThresholdOn::kObjectness ? d.objectness : d.score;
    if (value < config.tau) continue;
    if (!d.box.is_valid(image_height, image_width)) continue;
    Annotation a;
    a.box = d.box;
    a.class_id = d.class_id;
    a.provenance = Provenance::kPseudo;
    a.score = value;
    if (config.label_mode == LabelMode::kSoft) a.class_logits = d.class_logits;
    kept.push_back(std::move(a));
  }
  return kept;
}

std::vector<Annotation> pseudo_labels_for(const DetectorParams& teacher, const Image& image,
                                          const PseudoLabelConfig& config, int* total_count) {
  const auto candidates = nms(decode(forward(teacher, image).prediction, 0.0), config.nms_iou);
  if (total_count) *total_count += static_cast<int>(candidates.size());
  return select_pseudo_labels(candidates, config, image.height(), image.width());
}

PseudoDataset generate_pseudo_labels(const DetectorParams& teacher, const Manifest& target,
                                     const PseudoLabelConfig& config, const std::string& teacher_checkpoint_hash) {
  config.validate();
  PseudoDataset out;
  out.config = config;
  out.teacher_checkpoint_hash = teacher_checkpoint_hash;
  out.manifest.base_dir = target.base_dir;
  out.manifest.images = target.images;
  out.manifest.annotations.resize(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    Image image;
    try {
      image = read_png(target.image_path(i));
    } catch (const Error& e) {
      throw DataError("cannot read target image " + target.image_path(i).string() + ": " + e.what());
    }
    out.manifest.annotations[i] = pseudo_labels_for(teacher, image, config, &out.total_count);
    out.kept_count += static_cast<int>(out.manifest.annotations[i].size());
  }
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& manifest_path) {
  auto p = manifest_path;
  p.replace_extension(".meta.json");
  return p;
}

void write_pseudo_dataset(const std::filesystem::path& manifest_path, const PseudoDataset& dataset) {
  write_manifest(manifest_path, rebase(dataset.manifest, manifest_path.parent_path()));
  json meta = {{"tau", dataset.config.tau},
               {"label_mode", dataset.config.label_mode == LabelMode::kHard ? "hard" : "soft"},
               {"T", dataset.config.temperature},
               {"alpha", dataset.config.alpha},
               {"teacher_checkpoint_hash", dataset.teacher_checkpoint_hash},
               {"kept_count", dataset.kept_count},
               {"total_count", dataset.total_count},
               {"config", to_json(dataset.config)}};
  std::ofstream out(sidecar_path(manifest_path));
  if (!out) throw DataError("cannot write " + sidecar_path(manifest_path).string());
  out << meta.dump(1) << '\n';
}

PseudoDataset read_pseudo_dataset(const std::filesystem::path& manifest_path) {
  PseudoDataset d;
  d.manifest = read_manifest(manifest_path);
  std::ifstream in(sidecar_path(manifest_path));
  if (!in) throw DataError("missing pseudo-label sidecar " + sidecar_path(manifest_path).string());
  try {
    const json meta = json::parse(in);
    d.config = pseudo_label_config_from_json(meta.at("config"));
    d.teacher_checkpoint_hash = meta.at("teacher_checkpoint_hash").get<std::string>();
    d.kept_count = meta.at("kept_count").get<int>();
    d.total_count = meta.at("total_count").get<int>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed pseudo-label sidecar: ") + e.what());
  }
  return d;
}

Manifest build_student_dataset(const Manifest& labeled, const Manifest& pseudo, const std::filesystem::path& base_dir) {
  Manifest joint;
  joint.base_dir = base_dir;
  std::set<int> ids;
  auto append = [&](const Manifest& part) {
    const Manifest rebased = rebase(part, base_dir);
    for (std::size_t i = 0; i < rebased.size(); ++i) {
      ImageRecord record = rebased.images[i];
      record.id = static_cast<int>(joint.images.size());
      if (!ids.insert(record.id).second) throw InternalError("image id collision while joining datasets");
      joint.images.push_back(std::move(record));
      joint.annotations.push_back(i < rebased.annotations.size() ? rebased.annotations[i] : std::vector<Annotation>{});
    }
  };
  append(labeled);
  append(pseudo);
  return joint;
}

}  // namespace udadet
