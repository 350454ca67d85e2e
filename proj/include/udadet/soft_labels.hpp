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

#include <span>
#include <vector>

namespace udadet {

/// Tempered softmax exp(z_i / T) / sum_j exp(z_j / T), max-subtracted.
std::vector<double> soft_distribution(std::span<const double> logits, double temperature);

/// -sum_i [alpha p_i + (1 - alpha) p_hat_i] log q_i, with q clamped at 1e-12.
/// alpha = 1 is the plain hard-label cross-entropy.
double mixed_classification_loss(std::span<const double> q, std::span<const double> p,
                                  std::span<const double> p_hat, double alpha);

}  // namespace udadet
