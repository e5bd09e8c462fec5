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
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "envforge/bundle.hpp"
#include "envforge/envpool.hpp"
#include "envforge/provider.hpp"
#include "envforge/synthesis.hpp"

namespace envforge {

enum class VerifyFailure {
  kNone,
  kReflectionRejected,
  kSpawnFailed,
  kActionFailed,
  kMilestoneMissed,
};

std::string_view to_string(VerifyFailure failure);

struct Milestone {
  std::size_t step_index = 0;
  double expected = 0.0;
  double observed = 0.0;
  bool met = false;
};

struct VerificationReport {
  bool static_passed = false;
  bool dynamic_passed = false;
  std::vector<Milestone> milestones;
  VerifyFailure failure_stage = VerifyFailure::kNone;
  std::string detail;
};

nlohmann::json to_json(const VerificationReport& report);

struct VerifyOptions {
  std::chrono::milliseconds action_timeout{5000};
  std::chrono::milliseconds total_timeout{60000};
  int provider_retries = 2;
};

// Trimmed, lower-cased answer with surrounding quotes and punctuation removed.
std::string normalize_answer(std::string_view answer);

// Sends every file plus the instruction to the provider and asks whether
// the reward logic is correct. True only for a plain "yes". Provider
// failures are retried; ProviderUnavailable propagates.
bool static_reflect(const EnvBundle& bundle, Provider& provider,
                    const VerifyOptions& options = {});

// Leases an environment for bundle and replays its golden path, checking
// after each step that the latest reward is at least the milestone. Assumes
// the static gate already passed, so static_passed is set.
VerificationReport run_golden_path(const EnvBundle& bundle, EnvPool& pool,
                                   const VerifyOptions& options = {});

// Memoizes run_golden_path on the bundle's run command, files and golden
// path. The dynamic test has no side effects on the bundle, so bundles that
// differ only in task id or attempt number share one verdict.
class GoldenPathCache {
 public:
  VerificationReport run(const EnvBundle& bundle, EnvPool& pool,
                         const VerifyOptions& options = {});
  std::size_t hits() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, VerificationReport> entries_;
  std::size_t hits_ = 0;
};

// static_reflect, then run_golden_path only if reflection said yes.
VerificationReport evaluate_bundle(const EnvBundle& bundle, Provider& provider,
                                   EnvPool& pool, const VerifyOptions& options = {},
                                   GoldenPathCache* cache = nullptr);

// evaluate_bundle, recording the verdict in bundle.verified.
VerificationReport verify_bundle(EnvBundle& bundle, Provider& provider, EnvPool& pool,
                                 const VerifyOptions& options = {});

}  // namespace envforge
