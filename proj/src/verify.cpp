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

#include "envforge/verify.hpp"

#include <cctype>
#include <cstdio>
#include <map>
#include <mutex>

#include "envforge/error.hpp"
#include "envforge/interaction.hpp"
#include "envforge/util.hpp"

namespace envforge {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(VerifyFailure failure) {
  switch (failure) {
    case VerifyFailure::kNone: return "none";
    case VerifyFailure::kReflectionRejected: return "reflection_rejected";
    case VerifyFailure::kSpawnFailed: return "spawn_failed";
    case VerifyFailure::kActionFailed: return "action_failed";
    case VerifyFailure::kMilestoneMissed: return "milestone_missed";
  }
  return "none";
}

json to_json(const VerificationReport& r) {
  json milestones = json::array();
  for (const auto& m : r.milestones)
    milestones.push_back({{"step_index", m.step_index},
                          {"expected", m.expected},
                          {"observed", m.observed},
                          {"met", m.met}});
  return {{"static_passed", r.static_passed},
          {"dynamic_passed", r.dynamic_passed},
          {"milestones", milestones},
          {"failure_stage", to_string(r.failure_stage)},
          {"detail", r.detail}};
}

std::string normalize_answer(std::string_view answer) {
  std::string_view t = trim_view(answer);
  auto strip = [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) ||
           std::isspace(static_cast<unsigned char>(c));
  };
  while (!t.empty() && strip(t.front())) t.remove_prefix(1);
  while (!t.empty() && strip(t.back())) t.remove_suffix(1);
  return to_lower(t);
}

namespace {

constexpr std::string_view kReflectSystem =
    "You are auditing a generated RL environment. Read its source and decide "
    "whether the reward it prints on stdout rises only when the task is truly "
    "advanced, reaches 1.0 exactly when the task is complete, and is never "
    "granted for opening the app or for choosing a wrong option.";

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

bool static_reflect(const EnvBundle& bundle, Provider& provider,
                    const VerifyOptions& options) {
  if (bundle.files.empty()) throw ContractError("bundle has no files to review");
  std::string user = "Task: " + bundle.instruction + "\n";
  json files = json::object();
  for (const auto& [path, content] : bundle.files) {
    user += "\n--- " + path + " ---\n" + content + "\n";
    files[path] = content;
  }
  user += "\nIs the reward logic correct for this task? Reply with \"yes\" or \"no\" only.";

  PromptRequest req;
  req.stage = PromptStage::kReflect;
  req.system = std::string(kReflectSystem);
  req.user = std::move(user);
  req.context = {{"task_id", bundle.task_id},
                 {"instruction", bundle.instruction},
                 {"files", files}};
  req.sample_index = bundle.attempt;
  return normalize_answer(complete_with_retry(provider, req, options.provider_retries).text) ==
         "yes";
}

VerificationReport run_golden_path(const EnvBundle& bundle, EnvPool& pool,
                                   const VerifyOptions& options) {
  if (bundle.golden_path.steps.empty()) throw ContractError("golden path is empty");
  VerificationReport report;
  report.static_passed = true;

  EnvHandle handle;
  try {
    handle = pool.lease(bundle, pool.config().spawn_timeout);
  } catch (const SpawnError& e) {
    report.failure_stage = VerifyFailure::kSpawnFailed;
    report.detail = e.what();
    if (!e.captured_output().empty()) report.detail += "\n" + e.captured_output();
    return report;
  } catch (const TimeoutError& e) {
    report.failure_stage = VerifyFailure::kSpawnFailed;
    report.detail = e.what();
    return report;
  }

  const auto deadline = Clock::now() + options.total_timeout;
  Session session(kDefaultExcerptCap, options.action_timeout);
  double observed = 0.0;
  try {
    // The launch emission arrives with the health check.
    RewardStream launch = pool.drain_events(handle);
    if (!launch.events.empty()) observed = launch.events.back().reward;

    const auto& steps = bundle.golden_path.steps;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (Clock::now() > deadline) {
        report.failure_stage = VerifyFailure::kMilestoneMissed;
        report.detail = "golden path exceeded its time budget at step " + std::to_string(i);
        break;
      }
      StepResult r;
      try {
        r = session.step(pool, handle, steps[i].action);
      } catch (const TransportError& e) {
        report.failure_stage = VerifyFailure::kActionFailed;
        report.detail = "step " + std::to_string(i) + ": " + e.what();
        break;
      }
      if (!r.observation.ok()) {
        report.failure_stage = VerifyFailure::kActionFailed;
        report.detail = "step " + std::to_string(i) + ": " + steps[i].action.describe() +
                        " answered " + std::to_string(r.observation.status);
        break;
      }
      if (!r.events.events.empty()) observed = r.events.events.back().reward;
      Milestone m{i, steps[i].expect_reward_at_least, observed,
                  observed >= steps[i].expect_reward_at_least - kRewardEpsilon};
      report.milestones.push_back(m);
      if (!m.met && report.failure_stage == VerifyFailure::kNone) {
        report.failure_stage = VerifyFailure::kMilestoneMissed;
        report.detail = "step " + std::to_string(i) + " expected at least " +
                        fixed4(m.expected) + ", observed " + fixed4(m.observed);
      }
    }
  } catch (...) {
    pool.release(handle);
    throw;
  }
  pool.release(handle);

  report.dynamic_passed = report.failure_stage == VerifyFailure::kNone &&
                          report.milestones.size() == bundle.golden_path.steps.size() &&
                          classify_success(observed);
  if (!report.dynamic_passed && report.failure_stage == VerifyFailure::kNone) {
    report.failure_stage = VerifyFailure::kMilestoneMissed;
    report.detail = "golden path never reached reward 1.0";
  }
  return report;
}

VerificationReport evaluate_bundle(const EnvBundle& bundle, Provider& provider,
                                   EnvPool& pool, const VerifyOptions& options,
                                   GoldenPathCache* cache) {
  VerificationReport report;
  if (!static_reflect(bundle, provider, options)) {
    report.failure_stage = VerifyFailure::kReflectionRejected;
    report.detail = "self-review rejected the reward logic";
    return report;
  }
  return cache ? cache->run(bundle, pool, options) : run_golden_path(bundle, pool, options);
}

VerificationReport verify_bundle(EnvBundle& bundle, Provider& provider, EnvPool& pool,
                                 const VerifyOptions& options) {
  VerificationReport report = evaluate_bundle(bundle, provider, pool, options);
  bundle.verified = report.dynamic_passed;
  return report;
}

VerificationReport GoldenPathCache::run(const EnvBundle& bundle, EnvPool& pool,
                                        const VerifyOptions& options) {
  std::uint64_t h = fnv1a(bundle.run_command);
  for (const auto& [path, content] : bundle.files) {
    h = fnv1a(path, h);
    h = fnv1a(content, h);
  }
  h = fnv1a(to_json(bundle.golden_path).dump(), h);
  const std::string key = hex64(h);
  {
    std::lock_guard lock(mu_);
    if (auto it = entries_.find(key); it != entries_.end()) {
      ++hits_;
      return it->second;
    }
  }
  VerificationReport report = run_golden_path(bundle, pool, options);
  std::lock_guard lock(mu_);
  entries_.emplace(key, report);
  return report;
}

std::size_t GoldenPathCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

}  // namespace envforge
