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
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "udadet/image.hpp"

namespace udadet {

/// Dense row-major array of doubles with an explicit shape.
struct Tensor {
  std::vector<int> shape;
  AlignedDoubles values;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0);

  std::size_t size() const { return values.size(); }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  void fill(double v) { std::fill(values.begin(), values.end(), v); }

  bool operator==(const Tensor&) const = default;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Truncated normal (resampled beyond two standard deviations).
void fill_truncated_normal(Tensor& tensor, double stddev, std::mt19937_64& rng);

namespace layers {

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double silu(double z) { return z * sigmoid(z); }

inline double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

/// 3x3 convolution with zero padding 1.
struct ConvGeometry {
  int in_channels = 0;
  int in_height = 0;
  int in_width = 0;
  int out_channels = 0;
  int stride = 1;

  int out_height() const { return (in_height - 1) / stride + 1; }
  int out_width() const { return (in_width - 1) / stride + 1; }
  int patch_size() const { return in_channels * 9; }
};

/// col is [in_channels * 9, out_h * out_w].
void im2col(const double* input, const ConvGeometry& g, double* col);
/// Accumulates the transpose of im2col into d_input.
void col2im_add(const double* d_col, const ConvGeometry& g, double* d_input);

}  // namespace layers
}  // namespace udadet
