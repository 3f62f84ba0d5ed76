// Copyright 2026 The docground Authors.
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

namespace docground {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transient failure (transport, timeout, overloaded service). Callers may retry.
class RetryableError : public Error {
 public:
  using Error::Error;
};

// Malformed input: OCR JSON, service payloads, bundle files, planner replies.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Internal inconsistency between cooperating modules, e.g. an operand that
// references a segment the document does not contain.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-retryable service failure (4xx, replay miss, ...).
class ServiceError : public Error {
 public:
  using Error::Error;
};

}  // namespace docground
