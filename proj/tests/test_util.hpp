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

// Helpers shared by the unit tests: scratch directories, small random
// inputs and tiny training configs.

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "udadet/detector.hpp"
#include "udadet/engine.hpp"
#include "udadet/error.hpp"
#include "udadet/image.hpp"
#include "udadet/types.hpp"

namespace udadet::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("udadet_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::filesystem::path path_;
};

inline Image random_image(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w);
  for (double& v : img.values()) v = u(rng);
  return img;
}

inline BoundingBox random_box(std::mt19937_64& rng, double extent = 64.0, double min_size = 2.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double w = min_size + u(rng) * (extent / 2 - min_size);
  const double h = min_size + u(rng) * (extent / 2 - min_size);
  const double x = u(rng) * (extent - w);
  const double y = u(rng) * (extent - h);
  return {x, y, x + w, y + h};
}

/// Small detector so finite differences stay cheap.
inline DetectorConfig small_detector() {
  DetectorConfig c;
  c.widths = {4, 4, 6, 6};
  return c;
}

inline TrainConfig short_train(Role role, int phase1, int phase2, std::uint64_t seed = 1) {
  TrainConfig c;
  c.role = role;
  c.iters_phase1 = phase1;
  c.iters_phase2 = phase2;
  c.seed = seed;
  c.eval_every = 1000000;
  return c;
}

}  // namespace udadet::testing
