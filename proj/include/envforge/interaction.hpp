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

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "envforge/action.hpp"
#include "envforge/envpool.hpp"
#include "envforge/reward.hpp"

namespace envforge {

inline constexpr std::size_t kDefaultExcerptCap = 512;

// Page content stands in for the screenshot a visual agent would see.
struct Observation {
  int status = 0;
  std::string status_class;  // "2xx", "4xx", ... or "none"
  std::string body_digest;   // FNV-1a of the full body
  std::string body_excerpt;  // at most the configured cap
  std::string url;
  // type_text actions never reach the server.
  bool client_side = false;

  bool ok() const { return client_side || (status >= 200 && status < 400); }
};

nlohmann::json to_json(const Observation& obs);

struct StepResult {
  Observation observation;
  RewardStream events;
};

// Per-episode client state. Text typed with type_text is held here and sent
// with the next submit.
class Session {
 public:
  explicit Session(std::size_t excerpt_cap = kDefaultExcerptCap,
                   std::chrono::milliseconds action_timeout = std::chrono::milliseconds(5000))
      : excerpt_cap_(excerpt_cap), action_timeout_(action_timeout) {}

  // Executes one action against handle, then drains its reward events.
  // Throws TransportError when no response arrives.
  StepResult step(EnvPool& pool, const EnvHandle& handle, const EnvAction& action);

  const std::vector<std::pair<std::string, std::string>>& typed_fields() const {
    return typed_;
  }

 private:
  std::size_t excerpt_cap_;
  std::chrono::milliseconds action_timeout_;
  std::vector<std::pair<std::string, std::string>> typed_;
  std::string last_url_;
};

}  // namespace envforge
