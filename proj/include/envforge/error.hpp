/* Copyright 2026 The envforge Authors

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

#include <stdexcept>
#include <string>

namespace envforge {

// Root of every exception thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed input data (files, records, configuration).
class ParseError : public Error {
 public:
  using Error::Error;
};

// A generated artifact failed validation. Inside the synthesis loop this
// counts as a failed attempt.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Provider call failed in a way that may succeed on retry.
class TransientError : public Error {
 public:
  using Error::Error;
};

// Provider cannot be reached at all; aborts a synthesis job.
class ProviderUnavailable : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class StaleHandleError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public Error {
 public:
  using Error::Error;
};

class SpawnError : public Error {
 public:
  SpawnError(const std::string& what, std::string captured_output)
      : Error(what), captured_output_(std::move(captured_output)) {}

  const std::string& captured_output() const noexcept {
    return captured_output_;
  }

 private:
  std::string captured_output_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace envforge
