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

#include <algorithm>
#include <vector>

#include "udadet/detector.hpp"
#include "udadet/metrics.hpp"
#include "udadet/types.hpp"

namespace udadet::testing {

// Brute-force AP: rank by enumeration, greedy-match, then read the
// interpolated PR curve off directly.
struct OracleAp {
  double voc11 = 0.0;
  double allpoint = 0.0;
};

inline OracleAp oracle_ap(const std::vector<std::vector<Detection>>& dets, const std::vector<std::vector<Annotation>>& gts,
                   int cls, double thr) {
  struct Ranked {
    double score;
    int id;
    std::size_t image;
    const Detection* d;
  };
  std::vector<Ranked> ranked;
  int id = 0;
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (const Detection& d : dets[i]) {
      if (d.class_id == cls) ranked.push_back({d.score, id, i, &d});
      ++id;
    }
  // Insertion sort: higher score first, then lower id.
  for (std::size_t i = 1; i < ranked.size(); ++i)
    for (std::size_t j = i; j > 0; --j) {
      const Ranked &a = ranked[j - 1], &b = ranked[j];
      const bool swap = b.score > a.score || (b.score == a.score && b.id < a.id);
      if (!swap) break;
      std::swap(ranked[j - 1], ranked[j]);
    }
  int npos = 0;
  std::vector<std::vector<bool>> used(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    used[i].assign(gts[i].size(), false);
    for (const auto& g : gts[i]) npos += g.class_id == cls;
  }
  std::vector<int> tp;
  for (const Ranked& r : ranked) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t k = 0; k < gts[r.image].size(); ++k) {
      if (gts[r.image][k].class_id != cls || used[r.image][k]) continue;
      const double v = iou(r.d->box, gts[r.image][k].box);
      if (v > best_iou) {
        best_iou = v;
        best = int(k);
      }
    }
    const bool hit = best >= 0 && best_iou >= thr;
    if (hit) used[r.image][best] = true;
    tp.push_back(hit);
  }
  std::vector<double> P, R;
  int cum = 0;
  for (std::size_t k = 0; k < tp.size(); ++k) {
    cum += tp[k];
    P.push_back(double(cum) / double(k + 1));
    R.push_back(double(cum) / npos);
  }
  OracleAp out;
  for (int t = 0; t <= 10; ++t) {
    double m = 0.0;
    for (std::size_t k = 0; k < P.size(); ++k)
      if (R[k] >= t / 10.0 - 1e-12) m = std::max(m, P[k]);
    out.voc11 += m / 11.0;
  }
  double prev_r = 0.0;
  for (std::size_t k = 0; k < P.size(); ++k) {
    double m = 0.0;
    for (std::size_t j = k; j < P.size(); ++j) m = std::max(m, P[j]);
    out.allpoint += (R[k] - prev_r) * m;
    prev_r = R[k];
  }
  return out;
}

}  // namespace udadet::testing
