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

#include <vector>

#include "udadet/layers.hpp"

namespace udadet {

struct ParamRef;
struct ConstParamRef;

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 0.0005;
};

/// v = momentum * v + g + weight_decay * p;  p -= lr * v.
/// The three lists must be parallel (same names, same shapes).
void sgd_step(const std::vector<ParamRef>& params, const std::vector<ConstParamRef>& grads,
              const std::vector<ParamRef>& velocity, double lr, const SgdConfig& config);

}  // namespace udadet
