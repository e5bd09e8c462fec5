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
#include <condition_variable>
#include <mutex>
#include <string>

#include "envforge/provider.hpp"

namespace envforge {

struct LiveProviderConfig {
  std::string url;  // full chat-completions endpoint
  std::string key;
  std::string model;
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{120000};
  bool multimodal = true;

  // Reads PROVIDER_URL, PROVIDER_KEY and PROVIDER_MODEL. Throws ContractError
  // when the URL or key is missing.
  static LiveProviderConfig from_env();
};

// Client for an OpenAI-compatible chat-completions endpoint. At most
// max_in_flight requests run at once; further callers wait. HTTP 429, 5xx
// and transport failures raise TransientError, other error statuses
// ProviderUnavailable.
class LiveProvider : public Provider {
 public:
  explicit LiveProvider(LiveProviderConfig config);

  PromptResponse complete(const PromptRequest& request) override;
  ProviderCapabilities capabilities() const override { return {config_.multimodal}; }
  std::string identity() const override;

 private:
  LiveProviderConfig config_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
};

}  // namespace envforge
