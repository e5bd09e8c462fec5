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

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace envforge {

enum class PromptStage {
  kMetaPrompt,
  kPlanManifest,
  kGenerateFile,
  kGoldenPath,
  kReflect,
};

std::string_view to_string(PromptStage stage);

struct PromptRequest {
  PromptStage stage = PromptStage::kMetaPrompt;
  std::string system;
  std::string user;
  // Screenshot references, forwarded opaquely.
  std::vector<std::string> attachments;
  // Structured copy of what the prompt text describes (task, constraints,
  // target path, ...). Template providers read this instead of the text.
  nlohmann::json context = nlohmann::json::object();
  // Which synthesis attempt issued the request; 0 outside the retry loop.
  int sample_index = 0;
};

struct PromptResponse {
  std::string text;
};

struct ProviderCapabilities {
  bool multimodal = false;
};

// Code-model backend. Implementations must tolerate concurrent complete()
// calls. Throws TransientError for retryable failures and
// ProviderUnavailable when the backend cannot serve requests at all.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual PromptResponse complete(const PromptRequest& request) = 0;
  virtual ProviderCapabilities capabilities() const = 0;
  virtual std::string identity() const = 0;
};

}  // namespace envforge
