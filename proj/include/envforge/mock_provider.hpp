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

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "envforge/bundle.hpp"
#include "envforge/provider.hpp"
#include "envforge/trace.hpp"

namespace envforge {

struct MockProviderOptions {
  std::uint64_t seed = 7;
  // Chance that a synthesis attempt comes out clean. Ignored for tasks with
  // a script.
  double success_probability = 1.0;
  // Stages a failed attempt is spread over, uniformly.
  std::vector<FailureStage> failure_stages{
      FailureStage::kPromptInvalid, FailureStage::kManifestInvalid,
      FailureStage::kFileInvalid, FailureStage::kReflectionRejected,
      FailureStage::kDynamicTestFailed};
  // Per task id, the planned outcome of attempts 1, 2, ...; nullopt means a
  // clean attempt. Attempts past the end of a script are clean.
  std::map<std::string, std::vector<std::optional<FailureStage>>> scripts;
  // Fixed answer to every reflection request.
  std::optional<std::string> reflection_answer;
  // The first n calls throw TransientError.
  int transient_failures = 0;
};

// Deterministic template provider. Every response is a pure function of the
// options and the request's structured context: the environment it writes
// is a small Python server whose goals come from the task's goal hints, or
// are read off the trace when the task has none.
class MockProvider : public Provider {
 public:
  explicit MockProvider(MockProviderOptions options = {});

  PromptResponse complete(const PromptRequest& request) override;
  ProviderCapabilities capabilities() const override { return {true}; }
  std::string identity() const override;

  // Outcome this provider will produce for the given attempt (1-based).
  // sample_index 0 is always clean.
  std::optional<FailureStage> planned_failure(const std::string& task_id,
                                              int sample_index) const;

  std::size_t calls() const noexcept { return calls_.load(); }
  std::size_t calls(PromptStage stage) const noexcept {
    return stage_calls_[static_cast<int>(stage)].load();
  }

  const MockProviderOptions& options() const noexcept { return options_; }

 private:
  MockProviderOptions options_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> stage_calls_[5]{};
};

// One goal of a mock environment after distractors and weights are fixed.
struct MockGoal {
  std::string id;
  std::string kind;  // "input" or "select"
  std::string route;
  std::string field;
  std::string answer;
  std::vector<std::string> options;  // answer plus distractors, shuffled
  int weight_bp = 0;                 // weight in units of 1e-4
};

// Goals a mock environment implements for a synthesis context (as produced
// by to_json(SynthesisContext)).
std::vector<MockGoal> mock_goals(const nlohmann::json& context, std::uint64_t seed);

// Goal hints recoverable from a trace: submit payloads "field=value" become
// input goals, navigate/tap targets "/route/option" become select goals.
std::vector<GoalHint> goals_from_trace(const Trace& trace);

}  // namespace envforge
