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

#include "udadet/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "udadet/audit.hpp"
#include "udadet/error.hpp"

namespace udadet {

void Image::clip(double lo, double hi) {
  for (double& v : data_) v = std::clamp(v, lo, hi);
}

bool Image::in_unit_range() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image quantize8(const Image& image) {
  Image out = image;
  for (double& v : out.values()) v = to_byte(v) / 255.0;
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  cv::Mat mat(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width(); ++x) {
      // OpenCV stores BGR.
      row[x] = cv::Vec3b(to_byte(image.at(y, x, 2)), to_byte(image.at(y, x, 1)), to_byte(image.at(y, x, 0)));
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
    throw DataError("cannot write image " + path.string());
  }
}

Image read_png(const std::filesystem::path& path) {
  audit::record(path);
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) throw DataError("cannot read image " + path.string());
  Image image(mat.rows, mat.cols);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < mat.cols; ++x) {
      for (int c = 0; c < 3; ++c) image.at(y, x, c) = row[x][2 - c] / 255.0;
    }
  }
  return image;
}

}  // namespace udadet
