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
#include <filesystem>
#include <json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "udadet/manifest.hpp"
#include "udadet/types.hpp"

namespace udadet {

using Rgb = std::array<double, 3>;

/// Appearance of one domain. palette[0] is the background, palette[1 + k]
/// the base color of class k.
struct DomainSpec {
  std::vector<Rgb> palette;
  double texture_noise_sigma = 0.0;
  double fog_density = 0.0;
  double gamma = 1.0;
  Rgb white_balance{1.0, 1.0, 1.0};
  double blur_radius = 0.0;
  double atmospheric_light = 0.8;

  void validate() const;
};

enum class ScenarioName { kSim2Real, kAdverseWeather, kCrossCamera };

std::string_view to_string(ScenarioName name);
ScenarioName scenario_from_string(std::string_view name);

struct ImageSize {
  int height = 64;
  int width = 64;
};

struct CountRange {
  int min = 1;
  int max = 3;
};

struct ScenarioSpec {
  ScenarioName name = ScenarioName::kAdverseWeather;
  DomainSpec source;
  DomainSpec target;
  bool paired = false;  // target scenes are fogged copies of source scenes
  std::vector<double> fog_levels;
  ImageSize size;
  CountRange object_count;

  void validate() const;
};

/// The bundled scenario presets.
ScenarioSpec make_scenario(ScenarioName name);

nlohmann::json to_json(const DomainSpec& spec);
DomainSpec domain_spec_from_json(const nlohmann::json& json);
nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_spec_from_json(const nlohmann::json& json);

// ---------------------------------------------------------------------------
// Scene layout and rendering
// ---------------------------------------------------------------------------

struct SceneObject {
  int class_id = 0;  // 0 circle, 1 square, 2 triangle
  double center_x = 0.0;
  double center_y = 0.0;
  double extent = 0.0;  // box side length

  BoundingBox box() const;
  bool contains(double x, double y) const;
};

struct SceneLayout {
  ImageSize size;
  std::vector<SceneObject> objects;
};

/// Object placement only; depends on (seed, size, range) and not on the domain.
SceneLayout layout_scene(std::uint64_t seed, ImageSize size, CountRange range);

/// Renders a layout with 2x2 supersampled coverage, then applies noise,
/// white balance, gamma, blur and (when the spec sets a density) fog.
Sample render_scene(const SceneLayout& layout, std::uint64_t seed, const DomainSpec& spec);

Sample generate_scene(std::uint64_t seed, const DomainSpec& spec, ImageSize size, CountRange range);

/// I' = I t + A (1 - t), t = exp(-beta d), d = row / (H - 1).
Sample apply_fog(const Sample& sample, double beta, double atmospheric_light);
double fog_depth(int row, int height);

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct DatasetSizes {
  int source_train = 200;
  int target_train = 200;
  int target_val = 100;
};

struct DatasetSamples {
  std::vector<Sample> source_train;
  std::vector<Sample> target_train;
  std::vector<Sample> target_val;
};

/// Pure in-memory generation of the three splits.
DatasetSamples generate_dataset_samples(const ScenarioSpec& scenario, DatasetSizes sizes, std::uint64_t seed);

struct DatasetPaths {
  std::filesystem::path source_train;         // labeled source
  std::filesystem::path target_train;         // target images, labels withheld
  std::filesystem::path target_train_labels;  // oracle training and diagnostics only
  std::filesystem::path target_val;           // evaluation only

  static DatasetPaths in(const std::filesystem::path& data_dir);
};

/// Writes PNGs and manifests into `data_dir` and returns their paths.
DatasetPaths generate_dataset(const ScenarioSpec& scenario, DatasetSizes sizes, std::uint64_t seed,
                              const std::filesystem::path& data_dir);

}  // namespace udadet
