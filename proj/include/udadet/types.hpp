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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "udadet/image.hpp"

namespace udadet {

inline constexpr int kNumClasses = 3;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {"circle", "square", "triangle"};

/// Axis-aligned box in continuous pixel coordinates.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  /// 0 <= x_min < x_max <= width and likewise for y.
  bool is_valid(int image_height, int image_width) const {
    return x_min >= 0.0 && x_min < x_max && x_max <= image_width && y_min >= 0.0 && y_min < y_max &&
           y_max <= image_height;
  }

  bool operator==(const BoundingBox&) const = default;
};

enum class Provenance { kGroundTruth, kPseudo };

struct Annotation {
  BoundingBox box;
  int class_id = 0;
  Provenance provenance = Provenance::kGroundTruth;
  std::optional<double> score;
  std::optional<std::vector<double>> class_logits;

  bool operator==(const Annotation&) const = default;
};

enum class Domain { kSource, kTranslated, kTarget };

std::string_view to_string(Domain domain);
Domain domain_from_string(std::string_view name);
std::string_view to_string(Provenance provenance);
Provenance provenance_from_string(std::string_view name);

struct Sample {
  Image image;
  std::vector<Annotation> annotations;
  Domain domain = Domain::kSource;
  std::uint64_t scene_seed = 0;

  bool operator==(const Sample&) const = default;
};

}  // namespace udadet
