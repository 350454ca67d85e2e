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

#include <stdexcept>
#include <string>

namespace udadet {

// Exit codes used by the command line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kDataError = 3,
  kInternalError = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::kConfigError, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kDataError, what) {}
};

/// Raised when an internal invariant does not hold (id collisions, role leaks, ...).
class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what) : Error(ExitCode::kInternalError, what) {}
};

}  // namespace udadet
