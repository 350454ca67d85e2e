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

#include <filesystem>
#include <string>
#include <vector>

// Process-wide file access trace. Every dataset file opened through the
// library (manifests, label files, images) is recorded together with the
// innermost active stage name, so tests can check which stage touched which
// file.
namespace udadet::audit {

struct Entry {
  std::string path;   // absolute, lexically normalized
  std::string stage;  // innermost ScopedStage, or "" when none is active

  bool operator<(const Entry& other) const {
    return path != other.path ? path < other.path : stage < other.stage;
  }
  bool operator==(const Entry&) const = default;
};

void record(const std::filesystem::path& path);
std::vector<Entry> entries();
void clear();
std::string current_stage();

class ScopedStage {
 public:
  explicit ScopedStage(std::string stage);
  ~ScopedStage();
  ScopedStage(const ScopedStage&) = delete;
  ScopedStage& operator=(const ScopedStage&) = delete;
};

}  // namespace udadet::audit
