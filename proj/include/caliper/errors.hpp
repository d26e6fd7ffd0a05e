// Copyright 2026 The Caliper Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace caliper {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller handed over data that violates a documented precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A linear solve failed even after regularization.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

// An integrator produced non-finite state.
class Divergence : public Error {
 public:
  using Error::Error;
};

// Configuration or file-format problem; maps to CLI exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace caliper
