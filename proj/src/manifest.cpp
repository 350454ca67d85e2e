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

#include "udadet/manifest.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "udadet/audit.hpp"
#include "udadet/error.hpp"

namespace udadet {

using nlohmann::json;

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::kSource: return "source";
    case Domain::kTranslated: return "translated";
    case Domain::kTarget: return "target";
  }
  return "source";
}

Domain domain_from_string(std::string_view name) {
  if (name == "source") return Domain::kSource;
  if (name == "translated") return Domain::kTranslated;
  if (name == "target") return Domain::kTarget;
  throw DataError("unknown domain tag '" + std::string(name) + "'");
}

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::kGroundTruth ? "ground-truth" : "pseudo";
}

Provenance provenance_from_string(std::string_view name) {
  if (name == "ground-truth") return Provenance::kGroundTruth;
  if (name == "pseudo") return Provenance::kPseudo;
  throw DataError("unknown provenance '" + std::string(name) + "'");
}

std::size_t Manifest::annotation_count() const {
  return std::accumulate(annotations.begin(), annotations.end(), std::size_t{0},
                         [](std::size_t n, const auto& list) { return n + list.size(); });
}

json manifest_to_json(const Manifest& manifest) {
  json images = json::array();
  json annotations = json::array();
  int next_annotation_id = 0;
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    const ImageRecord& record = manifest.images[i];
    json item = {{"id", record.id},         {"file", record.file},
                 {"width", record.width},   {"height", record.height},
                 {"domain", to_string(record.domain)}, {"scene_seed", record.scene_seed}};
    if (record.source_image_id) item["source_image_id"] = *record.source_image_id;
    images.push_back(std::move(item));
    if (i >= manifest.annotations.size()) continue;
    for (const Annotation& a : manifest.annotations[i]) {
      json ann = {{"id", next_annotation_id++},
                  {"image_id", record.id},
                  {"bbox", {a.box.x_min, a.box.y_min, a.box.width(), a.box.height()}},
                  {"category_id", a.class_id},
                  {"provenance", to_string(a.provenance)}};
      if (a.score) ann["score"] = *a.score;
      if (a.class_logits) ann["logits"] = *a.class_logits;
      annotations.push_back(std::move(ann));
    }
  }
  json categories = json::array();
  for (int c = 0; c < kNumClasses; ++c) categories.push_back({{"id", c}, {"name", kClassNames[c]}});
  return {{"images", std::move(images)}, {"annotations", std::move(annotations)}, {"categories", std::move(categories)}};
}

Manifest manifest_from_json(const json& doc, const std::filesystem::path& base_dir) {
  Manifest manifest;
  manifest.base_dir = base_dir;
  try {
    std::map<int, std::size_t> index_of;
    for (const json& item : doc.at("images")) {
      ImageRecord record;
      record.id = item.at("id").get<int>();
      record.file = item.at("file").get<std::string>();
      record.width = item.at("width").get<int>();
      record.height = item.at("height").get<int>();
      record.domain = domain_from_string(item.at("domain").get<std::string>());
      record.scene_seed = item.at("scene_seed").get<std::uint64_t>();
      if (item.contains("source_image_id")) record.source_image_id = item["source_image_id"].get<int>();
      if (!index_of.emplace(record.id, manifest.images.size()).second) {
        throw DataError("duplicate image id " + std::to_string(record.id));
      }
      manifest.images.push_back(std::move(record));
    }
    manifest.annotations.resize(manifest.images.size());
    for (const json& ann : doc.at("annotations")) {
      const int image_id = ann.at("image_id").get<int>();
      auto it = index_of.find(image_id);
      if (it == index_of.end()) throw DataError("annotation refers to unknown image " + std::to_string(image_id));
      const auto& bbox = ann.at("bbox");
      Annotation a;
      a.box = {bbox.at(0).get<double>(), bbox.at(1).get<double>(), bbox.at(0).get<double>() + bbox.at(2).get<double>(),
               bbox.at(1).get<double>() + bbox.at(3).get<double>()};
      a.class_id = ann.at("category_id").get<int>();
      if (a.class_id < 0 || a.class_id >= kNumClasses) {
        throw DataError("category id out of range: " + std::to_string(a.class_id));
      }
      a.provenance = provenance_from_string(ann.at("provenance").get<std::string>());
      if (ann.contains("score")) a.score = ann["score"].get<double>();
      if (ann.contains("logits")) a.class_logits = ann["logits"].get<std::vector<double>>();
      manifest.annotations[it->second].push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << manifest_to_json(manifest).dump(1) << '\n';
}

Manifest read_manifest(const std::filesystem::path& path) {
  audit::record(path);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("cannot parse manifest " + path.string() + ": " + e.what());
  }
  return manifest_from_json(doc, path.parent_path());
}

std::vector<Sample> load_samples(const Manifest& manifest, bool with_annotations) {
  std::vector<Sample> samples;
  samples.reserve(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const ImageRecord& record = manifest.images[i];
    Sample sample;
    sample.image = read_png(manifest.image_path(i));
    if (sample.image.height() != record.height || sample.image.width() != record.width) {
      throw DataError("image size mismatch for " + manifest.image_path(i).string());
    }
    sample.domain = record.domain;
    sample.scene_seed = record.scene_seed;
    if (with_annotations && i < manifest.annotations.size()) sample.annotations = manifest.annotations[i];
    samples.push_back(std::move(sample));
  }
  return samples;
}

Manifest write_samples(const std::vector<Sample>& samples, const std::filesystem::path& dir,
                       const std::string& prefix) {
  Manifest manifest;
  manifest.base_dir = dir;
  std::filesystem::create_directories(dir / prefix);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    ImageRecord record;
    record.id = static_cast<int>(i);
    char name[32];
    std::snprintf(name, sizeof(name), "%05zu.png", i);
    record.file = prefix + "/" + name;
    record.width = s.image.width();
    record.height = s.image.height();
    record.domain = s.domain;
    record.scene_seed = s.scene_seed;
    write_png(dir / record.file, s.image);
    manifest.images.push_back(std::move(record));
    manifest.annotations.push_back(s.annotations);
  }
  return manifest;
}

Manifest rebase(const Manifest& manifest, const std::filesystem::path& new_base) {
  Manifest out = manifest;
  out.base_dir = new_base;
  const auto from = std::filesystem::absolute(manifest.base_dir).lexically_normal();
  const auto to = std::filesystem::absolute(new_base).lexically_normal();
  for (ImageRecord& record : out.images) {
    record.file = (from / record.file).lexically_normal().lexically_relative(to).generic_string();
  }
  return out;
}

}  // namespace udadet
