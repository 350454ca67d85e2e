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

#include "udadet/audit.hpp"

#include <mutex>
#include <set>

namespace udadet::audit {
namespace {

std::mutex g_mutex;
std::set<Entry> g_entries;
thread_local std::vector<std::string> t_stages;

}  // namespace

void record(const std::filesystem::path& path) {
  Entry entry{std::filesystem::absolute(path).lexically_normal().string(), current_stage()};
  std::lock_guard lock(g_mutex);
  g_entries.insert(std::move(entry));
}

std::vector<Entry> entries() {
  std::lock_guard lock(g_mutex);
  return {g_entries.begin(), g_entries.end()};
}

void clear() {
  std::lock_guard lock(g_mutex);
  g_entries.clear();
}

std::string current_stage() { return t_stages.empty() ? std::string() : t_stages.back(); }

ScopedStage::ScopedStage(std::string stage) { t_stages.push_back(std::move(stage)); }

ScopedStage::~ScopedStage() { t_stages.pop_back(); }

}  // namespace udadet::audit
