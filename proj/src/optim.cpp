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

#include "udadet/optim.hpp"

#include "udadet/detector.hpp"
#include "udadet/error.hpp"

namespace udadet {

void sgd_step(const std::vector<ParamRef>& params, const std::vector<ConstParamRef>& grads,
              const std::vector<ParamRef>& velocity, double lr, const SgdConfig& config) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw InternalError("optimizer received mismatched parameter lists");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    AlignedDoubles& p = params[i].tensor->values;
    const AlignedDoubles& g = grads[i].tensor->values;
    AlignedDoubles& v = velocity[i].tensor->values;
    if (p.size() != g.size() || p.size() != v.size()) {
      throw InternalError("optimizer shape mismatch for " + params[i].name);
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = config.momentum * v[k] + g[k] + config.weight_decay * p[k];
      p[k] -= lr * v[k];
    }
  }
}

}  // namespace udadet
