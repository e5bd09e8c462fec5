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

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "envforge/bundle.hpp"
#include "envforge/error.hpp"
#include "envforge/provider.hpp"
#include "envforge/trace.hpp"

namespace envforge {

class EnvPool;
struct VerificationReport;

// A rejected synthesis attempt, tagged with the stage that rejected it.
class AttemptFailed : public ValidationError {
 public:
  AttemptFailed(FailureStage stage, const std::string& what)
      : ValidationError(what), stage_(stage) {}
  FailureStage stage() const noexcept { return stage_; }

 private:
  FailureStage stage_;
};

// Task-specific system prompt produced by the meta-prompting stage. The
// structured context travels with it so later stages can forward it.
struct SystemPrompt {
  std::string text;
  nlohmann::json context = nlohmann::json::object();
};

struct CallOptions {
  int sample_index = 0;
  // Extra tries after a TransientError before giving up.
  int provider_retries = 2;
};

// Calls provider.complete, retrying transient failures. Throws
// ProviderUnavailable once retries are exhausted.
PromptResponse complete_with_retry(Provider& provider, const PromptRequest& request,
                                   int retries);

// Tokens every generated system prompt must contain for ctx's constraints.
std::vector<std::string> mandatory_prompt_tokens(const ConstraintSet& constraints);

// Removes a surrounding markdown code fence, if any.
std::string strip_code_fence(std::string_view text);

// Asks the provider for a task-specific system prompt. Throws AttemptFailed
// (prompt_invalid) when a mandatory clause is missing.
SystemPrompt meta_prompt(const SynthesisContext& ctx, Provider& provider,
                         const CallOptions& options = {});

// Asks for the file list. Throws AttemptFailed (manifest_invalid) when the
// answer is not a JSON list of paths or violates a manifest invariant.
FileManifest plan_manifest(const SystemPrompt& prompt, Provider& provider,
                           const CallOptions& options = {});

// Generates one file. prior must hold exactly the entries preceding path.
// Throws ContractError on a sequencing violation and AttemptFailed
// (file_invalid) for empty content or a server file without the reward
// tokens.
std::string generate_file(const SystemPrompt& prompt, const FileManifest& manifest,
                          const std::string& path,
                          const std::map<std::string, std::string>& prior,
                          Provider& provider, const CallOptions& options = {});

// Generates the golden-path script. Throws AttemptFailed (file_invalid) when
// the answer does not parse or fails validation.
GoldenPathScript generate_golden_path(const SystemPrompt& prompt,
                                      const FileManifest& manifest,
                                      const std::map<std::string, std::string>& files,
                                      Provider& provider, const CallOptions& options = {});

struct SynthConfig {
  int max_attempts = 5;
  ConstraintSet constraints;
  int provider_retries = 2;
  std::string run_command = std::string(kDefaultRunCommand);
};

struct AttemptRecord {
  int attempt = 0;
  std::optional<FailureStage> failure;
  std::string reason;
};

struct AttemptLog {
  std::string task_id;
  std::vector<AttemptRecord> attempts;
  bool verified = false;

  // Attempt number that produced the verified bundle, if any.
  std::optional<int> succeeded_at() const;
};

nlohmann::json to_json(const AttemptLog& log);
AttemptLog attempt_log_from_json(const nlohmann::json& j);

// Verdict on a fully generated bundle; see verify.hpp.
using BundleVerifier = std::function<VerificationReport(const EnvBundle&)>;

struct SynthesisResult {
  EnvBundle bundle;
  AttemptLog log;
};

// Runs the whole pipeline up to max_attempts times without feeding earlier
// failures back. Returns the first verified bundle, or the last attempt's
// (possibly partial) bundle unverified. Only ProviderUnavailable escapes.
SynthesisResult synthesize_environment(const TaskSpec& task, const Trace& trace,
                                       Provider& provider, const SynthConfig& config,
                                       const BundleVerifier& verifier);

// Same, verifying with verify_bundle against pool.
SynthesisResult synthesize_environment(const TaskSpec& task, const Trace& trace,
                                       Provider& provider, const SynthConfig& config,
                                       EnvPool& pool);

}  // namespace envforge
