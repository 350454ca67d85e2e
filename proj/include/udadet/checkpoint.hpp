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
#include <json.hpp>
#include <optional>
#include <string>

#include "udadet/detector.hpp"
#include "udadet/grl_align.hpp"

namespace udadet {

/// Binary layout: "UDADCKPT", u32 version, u64 header length, JSON header
/// (metadata plus a tensor table of name/shape/offset), then the tensor data
/// as little-endian doubles.
struct Checkpoint {
  DetectorParams params;
  std::optional<DetectorParams> velocity;  // momentum buffers
  std::optional<DomainClassifier> domain;
  std::optional<DomainClassifier> domain_velocity;
  int iteration = 0;
  std::string role;
  std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// SHA-256 over parameter names, shapes and values.
std::string params_hash(const DetectorParams& params);

}  // namespace udadet
