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

#include "udadet/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "udadet/error.hpp"
#include "udadet/hashing.hpp"

namespace udadet {

using nlohmann::json;

namespace {

constexpr std::uint64_t kLayoutStream = 0x1a70u;
constexpr std::uint64_t kRenderStream = 0x4e4du;
constexpr double kMinExtent = 10.0;  // at 64 px
constexpr double kMaxExtent = 20.0;
constexpr double kBorder = 1.0;
constexpr double kGap = 2.0;

bool positive_rgb(const Rgb& v) { return v[0] > 0.0 && v[1] > 0.0 && v[2] > 0.0; }

bool boxes_too_close(const BoundingBox& a, const BoundingBox& b) {
  return a.x_min - kGap < b.x_max && b.x_min - kGap < a.x_max && a.y_min - kGap < b.y_max &&
         b.y_min - kGap < a.y_max;
}

void gaussian_blur(Image& image, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = static_cast<int>(std::ceil(2.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += kernel[k + radius];
  }
  for (double& w : kernel) w /= total;

  const int h = image.height();
  const int w = image.width();
  Image tmp(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * image.at(y, std::clamp(x + k, 0, w - 1), c);
        tmp.at(y, x, c) = acc;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp.at(std::clamp(y + k, 0, h - 1), x, c);
        image.at(y, x, c) = acc;
      }
}

json rgb_json(const Rgb& v) { return json::array({v[0], v[1], v[2]}); }
Rgb rgb_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

void DomainSpec::validate() const {
  if (palette.size() < static_cast<std::size_t>(1 + kNumClasses)) {
    throw ConfigError("palette needs a background and one color per class");
  }
  for (const Rgb& color : palette)
    for (double v : color)
      if (v < 0.0 || v > 1.0) throw ConfigError("palette colors must lie in [0,1]");
  if (texture_noise_sigma < 0.0) throw ConfigError("texture_noise_sigma must be >= 0");
  if (fog_density < 0.0) throw ConfigError("fog_density must be >= 0");
  if (gamma <= 0.0) throw ConfigError("gamma must be > 0");
  if (!positive_rgb(white_balance)) throw ConfigError("white balance gains must be > 0");
  if (blur_radius < 0.0) throw ConfigError("blur_radius must be >= 0");
  if (atmospheric_light < 0.0 || atmospheric_light > 1.0) throw ConfigError("atmospheric_light must lie in [0,1]");
}

void ScenarioSpec::validate() const {
  source.validate();
  target.validate();
  if (paired && fog_levels.empty()) throw ConfigError("paired scenario needs at least one fog level");
  for (double beta : fog_levels)
    if (beta < 0.0) throw ConfigError("fog levels must be >= 0");
  if (size.height < 32 || size.width < 32) throw ConfigError("image size must be at least 32x32");
  if (object_count.min < 0 || object_count.min > object_count.max) throw ConfigError("invalid object count range");
}

std::string_view to_string(ScenarioName name) {
  switch (name) {
    case ScenarioName::kSim2Real: return "sim2real";
    case ScenarioName::kAdverseWeather: return "adverse-weather";
    case ScenarioName::kCrossCamera: return "cross-camera";
  }
  return "adverse-weather";
}

ScenarioName scenario_from_string(std::string_view name) {
  if (name == "sim2real") return ScenarioName::kSim2Real;
  if (name == "adverse-weather") return ScenarioName::kAdverseWeather;
  if (name == "cross-camera") return ScenarioName::kCrossCamera;
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

ScenarioSpec make_scenario(ScenarioName name) {
  // Muted "real camera" palette shared by several domains.
  const std::vector<Rgb> natural = {{0.42, 0.45, 0.40}, {0.80, 0.28, 0.22}, {0.24, 0.62, 0.30}, {0.26, 0.36, 0.80}};

  ScenarioSpec spec;
  spec.name = name;
  switch (name) {
    case ScenarioName::kSim2Real: {
      DomainSpec synthetic;
      synthetic.palette = {{0.55, 0.55, 0.58}, {0.98, 0.10, 0.10}, {0.10, 0.92, 0.15}, {0.12, 0.15, 0.98}};
      synthetic.texture_noise_sigma = 0.0;
      DomainSpec real;
      real.palette = natural;
      real.texture_noise_sigma = 0.08;
      real.gamma = 1.5;
      real.white_balance = {1.15, 0.95, 0.75};
      real.blur_radius = 0.9;
      spec.source = synthetic;
      spec.target = real;
      break;
    }
    case ScenarioName::kAdverseWeather: {
      DomainSpec clear;
      clear.palette = natural;
      clear.texture_noise_sigma = 0.03;
      clear.atmospheric_light = 0.85;
      spec.source = clear;
      spec.target = clear;
      spec.paired = true;
      spec.fog_levels = {0.8, 1.6, 2.4};
      spec.target.fog_density = spec.fog_levels[1];
      break;
    }
    case ScenarioName::kCrossCamera: {
      DomainSpec camera_a;
      camera_a.palette = natural;
      camera_a.texture_noise_sigma = 0.02;
      camera_a.gamma = 0.7;
      camera_a.white_balance = {0.82, 1.0, 1.22};
      DomainSpec camera_b;
      camera_b.palette = natural;
      camera_b.texture_noise_sigma = 0.07;
      camera_b.gamma = 1.4;
      camera_b.white_balance = {1.18, 1.0, 0.78};
      camera_b.blur_radius = 0.8;
      spec.source = camera_a;
      spec.target = camera_b;
      break;
    }
  }
  return spec;
}

json to_json(const DomainSpec& spec) {
  json palette = json::array();
  for (const Rgb& c : spec.palette) palette.push_back(rgb_json(c));
  return {{"palette", palette},
          {"texture_noise_sigma", spec.texture_noise_sigma},
          {"fog_density", spec.fog_density},
          {"gamma", spec.gamma},
          {"white_balance", rgb_json(spec.white_balance)},
          {"blur_radius", spec.blur_radius},
          {"atmospheric_light", spec.atmospheric_light}};
}

DomainSpec domain_spec_from_json(const json& j) {
  try {
    DomainSpec spec;
    for (const json& c : j.at("palette")) spec.palette.push_back(rgb_from(c));
    spec.texture_noise_sigma = j.value("texture_noise_sigma", 0.0);
    spec.fog_density = j.value("fog_density", 0.0);
    spec.gamma = j.value("gamma", 1.0);
    if (j.contains("white_balance")) spec.white_balance = rgb_from(j["white_balance"]);
    spec.blur_radius = j.value("blur_radius", 0.0);
    spec.atmospheric_light = j.value("atmospheric_light", 0.8);
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid domain spec: ") + e.what());
  }
}

json to_json(const ScenarioSpec& spec) {
  return {{"name", to_string(spec.name)},
          {"source", to_json(spec.source)},
          {"target", to_json(spec.target)},
          {"paired", spec.paired},
          {"fog_levels", spec.fog_levels},
          {"image_size", {spec.size.height, spec.size.width}},
          {"object_count", {spec.object_count.min, spec.object_count.max}}};
}

ScenarioSpec scenario_spec_from_json(const json& j) {
  try {
    ScenarioSpec spec = make_scenario(scenario_from_string(j.at("name").get<std::string>()));
    if (j.contains("source")) spec.source = domain_spec_from_json(j["source"]);
    if (j.contains("target")) spec.target = domain_spec_from_json(j["target"]);
    spec.paired = j.value("paired", spec.paired);
    if (j.contains("fog_levels")) spec.fog_levels = j["fog_levels"].get<std::vector<double>>();
    if (j.contains("image_size")) spec.size = {j["image_size"].at(0).get<int>(), j["image_size"].at(1).get<int>()};
    if (j.contains("object_count")) {
      spec.object_count = {j["object_count"].at(0).get<int>(), j["object_count"].at(1).get<int>()};
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid scenario spec: ") + e.what());
  }
}

BoundingBox SceneObject::box() const {
  const double half = 0.5 * extent;
  return {center_x - half, center_y - half, center_x + half, center_y + half};
}

bool SceneObject::contains(double x, double y) const {
  const double half = 0.5 * extent;
  const double dx = x - center_x;
  const double dy = y - center_y;
  switch (class_id) {
    case 0: return dx * dx + dy * dy <= half * half;
    case 1: return std::abs(dx) <= half && std::abs(dy) <= half;
    default: {
      // Upward isosceles triangle with apex at the top edge of the box.
      if (dy < -half || dy > half) return false;
      const double half_width = half * (dy + half) / extent;
      return std::abs(dx) <= half_width;
    }
  }
}

SceneLayout layout_scene(std::uint64_t seed, ImageSize size, CountRange range) {
  if (size.height < 32 || size.width < 32) throw ConfigError("image size must be at least 32x32");
  if (range.min < 0 || range.min > range.max) throw ConfigError("invalid object count range");

  std::mt19937_64 rng(mix_seed(seed, kLayoutStream));
  SceneLayout layout;
  layout.size = size;
  const int count = std::uniform_int_distribution<int>(range.min, range.max)(rng);
  const double scale = std::min(size.height, size.width) / 64.0;
  std::uniform_int_distribution<int> pick_class(0, kNumClasses - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int n = 0; n < count; ++n) {
    SceneObject object;
    object.class_id = pick_class(rng);
    double extent = (kMinExtent + (kMaxExtent - kMinExtent) * unit(rng)) * scale;
    bool placed = false;
    while (!placed) {
      if (extent < 4.0) throw InternalError("cannot place scene objects; object count too large for image size");
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const double lo_x = kBorder + 0.5 * extent;
        const double hi_x = size.width - kBorder - 0.5 * extent;
        const double lo_y = kBorder + 0.5 * extent;
        const double hi_y = size.height - kBorder - 0.5 * extent;
        // Snap centers onto the supersampling lattice so apexes and edges are sampled.
        object.center_x = std::floor(2.0 * (lo_x + (hi_x - lo_x) * unit(rng))) / 2.0 + 0.25;
        object.center_y = std::floor(2.0 * (lo_y + (hi_y - lo_y) * unit(rng))) / 2.0 + 0.25;
        object.extent = extent;
        const BoundingBox box = object.box();
        if (box.x_min < 0.0 || box.y_min < 0.0 || box.x_max > size.width || box.y_max > size.height) continue;
        placed = std::none_of(layout.objects.begin(), layout.objects.end(),
                              [&](const SceneObject& other) { return boxes_too_close(box, other.box()); });
      }
      if (!placed) extent *= 0.85;
    }
    layout.objects.push_back(object);
  }
  return layout;
}

Sample render_scene(const SceneLayout& layout, std::uint64_t seed, const DomainSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(mix_seed(seed, kRenderStream));
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int h = layout.size.height;
  const int w = layout.size.width;

  Rgb background = spec.palette[0];
  for (double& v : background) v = std::clamp(v + 0.04 * jitter(rng), 0.0, 1.0);
  const double gradient = 0.08 * jitter(rng);

  std::vector<Rgb> colors;
  for (const SceneObject& object : layout.objects) {
    Rgb color = spec.palette[1 + object.class_id];
    for (double& v : color) v = std::clamp(v + 0.05 * jitter(rng), 0.0, 1.0);
    colors.push_back(color);
  }

  Image image(h, w);
  static constexpr double kSub[2] = {0.25, 0.75};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double shade = 1.0 + gradient * (2.0 * x / (w - 1) - 1.0);
      Rgb pixel{background[0] * shade, background[1] * shade, background[2] * shade};
      for (std::size_t k = 0; k < layout.objects.size(); ++k) {
        const SceneObject& object = layout.objects[k];
        const BoundingBox box = object.box();
        if (x + 1 <= box.x_min || x >= box.x_max || y + 1 <= box.y_min || y >= box.y_max) continue;
        int inside = 0;
        for (double sy : kSub)
          for (double sx : kSub) inside += object.contains(x + sx, y + sy) ? 1 : 0;
        const double alpha = inside / 4.0;
        for (int c = 0; c < 3; ++c) pixel[c] = (1.0 - alpha) * pixel[c] + alpha * colors[k][c];
      }
      for (int c = 0; c < 3; ++c) image.at(y, x, c) = pixel[c];
    }
  }

  for (double& v : image.values()) {
    if (spec.texture_noise_sigma > 0.0) v += spec.texture_noise_sigma * noise(rng);
  }
  image.clip();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double& v = image.at(y, x, c);
        v = std::clamp(v * spec.white_balance[c], 0.0, 1.0);
        if (spec.gamma != 1.0) v = std::pow(v, spec.gamma);
      }
  gaussian_blur(image, spec.blur_radius);
  image.clip();

  Sample sample;
  sample.image = std::move(image);
  sample.scene_seed = seed;
  for (const SceneObject& object : layout.objects) {
    Annotation a;
    a.box = object.box();
    a.class_id = object.class_id;
    sample.annotations.push_back(a);
  }
  if (spec.fog_density > 0.0) return apply_fog(sample, spec.fog_density, spec.atmospheric_light);
  return sample;
}

Sample generate_scene(std::uint64_t seed, const DomainSpec& spec, ImageSize size, CountRange range) {
  return render_scene(layout_scene(seed, size, range), seed, spec);
}

double fog_depth(int row, int height) { return height > 1 ? static_cast<double>(row) / (height - 1) : 0.0; }

Sample apply_fog(const Sample& sample, double beta, double atmospheric_light) {
  if (beta < 0.0) throw ConfigError("fog density beta must be >= 0");
  Sample out = sample;
  if (beta == 0.0) return out;
  const int h = out.image.height();
  for (int y = 0; y < h; ++y) {
    const double t = std::exp(-beta * fog_depth(y, h));
    for (int x = 0; x < out.image.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        double& v = out.image.at(y, x, c);
        v = v * t + atmospheric_light * (1.0 - t);
      }
  }
  return out;
}

DatasetSamples generate_dataset_samples(const ScenarioSpec& scenario, DatasetSizes sizes, std::uint64_t seed) {
  scenario.validate();
  if (sizes.source_train < 1 || sizes.target_train < 1 || sizes.target_val < 1) {
    throw ConfigError("all split sizes must be >= 1");
  }
  auto scene_seed = [seed](std::uint64_t split, int index) {
    return mix_seed(mix_seed(seed, split), static_cast<std::uint64_t>(index));
  };

  DatasetSamples out;
  std::set<std::uint64_t> source_seeds, target_seeds, val_seeds;
  for (int i = 0; i < sizes.source_train; ++i) {
    const std::uint64_t s = scene_seed(1, i);
    source_seeds.insert(s);
    Sample sample = generate_scene(s, scenario.source, scenario.size, scenario.object_count);
    sample.domain = Domain::kSource;
    out.source_train.push_back(std::move(sample));
  }

  if (scenario.paired) {
    for (const Sample& clear : out.source_train) {
      for (double beta : scenario.fog_levels) {
        Sample fogged = apply_fog(clear, beta, scenario.target.atmospheric_light);
        fogged.domain = Domain::kTarget;
        out.target_train.push_back(std::move(fogged));
      }
    }
  } else {
    for (int i = 0; i < sizes.target_train; ++i) {
      const std::uint64_t s = scene_seed(2, i);
      target_seeds.insert(s);
      Sample sample = generate_scene(s, scenario.target, scenario.size, scenario.object_count);
      sample.domain = Domain::kTarget;
      out.target_train.push_back(std::move(sample));
    }
  }

  for (int i = 0; i < sizes.target_val; ++i) {
    const std::uint64_t s = scene_seed(3, i);
    val_seeds.insert(s);
    Sample sample;
    if (scenario.paired) {
      const double beta = scenario.fog_levels[static_cast<std::size_t>(i) % scenario.fog_levels.size()];
      sample = apply_fog(generate_scene(s, scenario.source, scenario.size, scenario.object_count), beta,
                         scenario.target.atmospheric_light);
    } else {
      sample = generate_scene(s, scenario.target, scenario.size, scenario.object_count);
    }
    sample.domain = Domain::kTarget;
    out.target_val.push_back(std::move(sample));
  }

  auto overlaps = [](const std::set<std::uint64_t>& a, const std::set<std::uint64_t>& b) {
    return std::any_of(a.begin(), a.end(), [&](std::uint64_t s) { return b.count(s) > 0; });
  };
  const std::size_t expected = static_cast<std::size_t>(sizes.source_train);
  if (source_seeds.size() != expected || val_seeds.size() != static_cast<std::size_t>(sizes.target_val) ||
      overlaps(source_seeds, val_seeds) || overlaps(source_seeds, target_seeds) || overlaps(target_seeds, val_seeds)) {
    throw InternalError("dataset splits share scene seeds");
  }
  return out;
}

DatasetPaths DatasetPaths::in(const std::filesystem::path& data_dir) {
  return {data_dir / "source_train.json", data_dir / "target_train.json", data_dir / "target_train_labels.json",
          data_dir / "target_val.json"};
}

DatasetPaths generate_dataset(const ScenarioSpec& scenario, DatasetSizes sizes, std::uint64_t seed,
                              const std::filesystem::path& data_dir) {
  DatasetSamples samples = generate_dataset_samples(scenario, sizes, seed);
  const DatasetPaths paths = DatasetPaths::in(data_dir);

  write_manifest(paths.source_train, write_samples(samples.source_train, data_dir, "source_train"));
  Manifest target = write_samples(samples.target_train, data_dir, "target_train");
  write_manifest(paths.target_train_labels, target);
  for (auto& list : target.annotations) list.clear();
  write_manifest(paths.target_train, target);
  write_manifest(paths.target_val, write_samples(samples.target_val, data_dir, "target_val"));
  return paths;
}

}  // namespace udadet
