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
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace udadet {

// Vectorized Eigen reductions peel a head that depends on buffer alignment,
// which changes the summation order. Fixed alignment keeps results
// bit-identical from one process to the next.
using AlignedDoubles = std::vector<double, Eigen::aligned_allocator<double>>;

/// H x W x 3 image of reals, interleaved RGB, row-major.
class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0)
      : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width * 3, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void clip(double lo = 0.0, double hi = 1.0);
  bool in_unit_range() const;

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int height_ = 0;
  int width_ = 0;
  AlignedDoubles data_;
};

/// 8-bit RGB PNG. Values are quantized with round(v * 255) on write.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// Rounds every value to the nearest 8-bit level, as a PNG round trip would.
Image quantize8(const Image& image);

}  // namespace udadet
