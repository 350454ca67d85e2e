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

#include "udadet/layers.hpp"

#include <functional>
#include <numeric>

namespace udadet {

Tensor::Tensor(std::vector<int> dims, double fill)
    : shape(std::move(dims)),
      values(static_cast<std::size_t>(std::accumulate(shape.begin(), shape.end(), 1, std::multiplies<>())), fill) {}

void fill_truncated_normal(Tensor& tensor, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : tensor.values) {
    double z = normal(rng);
    while (std::abs(z) > 2.0) z = normal(rng);
    v = stddev * z;
  }
}

namespace layers {

void im2col(const double* input, const ConvGeometry& g, double* col) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int plane = oh * ow;
  for (int c = 0; c < g.in_channels; ++c) {
    const double* channel = input + static_cast<std::size_t>(c) * g.in_height * g.in_width;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col + static_cast<std::size_t>((c * 3 + ky) * 3 + kx) * plane;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride + ky - 1;
          double* out = row + oy * ow;
          if (iy < 0 || iy >= g.in_height) {
            std::fill(out, out + ow, 0.0);
            continue;
          }
          const double* src = channel + static_cast<std::size_t>(iy) * g.in_width;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride + kx - 1;
            out[ox] = (ix >= 0 && ix < g.in_width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* d_col, const ConvGeometry& g, double* d_input) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int plane = oh * ow;
  for (int c = 0; c < g.in_channels; ++c) {
    double* channel = d_input + static_cast<std::size_t>(c) * g.in_height * g.in_width;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = d_col + static_cast<std::size_t>((c * 3 + ky) * 3 + kx) * plane;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride + ky - 1;
          if (iy < 0 || iy >= g.in_height) continue;
          double* dst = channel + static_cast<std::size_t>(iy) * g.in_width;
          const double* src = row + oy * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride + kx - 1;
            if (ix >= 0 && ix < g.in_width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace layers
}  // namespace udadet
