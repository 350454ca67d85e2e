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

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "udadet/types.hpp"

namespace udadet {

struct ImageRecord {
  int id = 0;
  std::string file;  // relative to the manifest's directory
  int width = 0;
  int height = 0;
  Domain domain = Domain::kSource;
  std::uint64_t scene_seed = 0;
  std::optional<int> source_image_id;

  bool operator==(const ImageRecord&) const = default;
};

/// COCO-style dataset listing. `annotations[i]` belongs to `images[i]`.
struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ImageRecord> images;
  std::vector<std::vector<Annotation>> annotations;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  std::size_t annotation_count() const;
  std::filesystem::path image_path(std::size_t index) const { return base_dir / images[index].file; }
};

/// Serialized layout: {images: [...], annotations: [...], categories: [...]}
/// with bbox as [x_min, y_min, width, height].
nlohmann::json manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& json, const std::filesystem::path& base_dir);

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

/// Reads every image of the manifest. Annotations are copied only when asked.
std::vector<Sample> load_samples(const Manifest& manifest, bool with_annotations);

/// Writes PNGs as `<dir>/<prefix>_<index>.png` and returns the manifest
/// (base_dir = dir). Images written to disk are 8-bit quantized.
Manifest write_samples(const std::vector<Sample>& samples, const std::filesystem::path& dir,
                       const std::string& prefix);

/// Image records plus annotations, with every file path rebased onto `new_base`.
Manifest rebase(const Manifest& manifest, const std::filesystem::path& new_base);

}  // namespace udadet
