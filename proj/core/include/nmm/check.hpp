/* Copyright 2026 The NMM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace nmm {

// Invalid user-facing configuration: bad field values, bad masks, bad flags.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not satisfy an operation's contract.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Corrupt, truncated, or incompatible checkpoint file.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nmm

// Throws ExType with a streamed message when cond is false.
#define NMM_CHECK(cond, ExType, msg)    \
  do {                                  \
    if (!(cond)) {                      \
      std::ostringstream nmm_oss_;      \
      nmm_oss_ << msg;                  \
      throw ExType(nmm_oss_.str());     \
    }                                   \
  } while (0)
