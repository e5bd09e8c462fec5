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
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "envforge/action.hpp"
#include "envforge/bundle.hpp"
#include "envforge/envpool.hpp"
#include "envforge/interaction.hpp"
#include "envforge/reward.hpp"

namespace envforge {

struct TrajectoryStep {
  EnvAction action;
  Observation observation;
  RewardStream events;
  std::optional<std::string> error;
};

struct Trajectory {
  std::string task_id;
  std::vector<TrajectoryStep> steps;
  double final_reward = 0.0;
  bool success = false;
  double wall_clock_s = 0.0;
  std::size_t step_count = 0;

  // Every event drained during the episode, in order.
  RewardStream events() const;
};

nlohmann::json to_json(const Trajectory& trajectory);
// Reads the dump format back; observations keep only the status.
Trajectory trajectory_from_json(const nlohmann::json& j);
std::vector<Trajectory> read_trajectories(std::istream& in);

struct EpisodeView {
  const std::vector<TrajectoryStep>& steps;
  double current_reward;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode() {}
  // Returning EnvAction::stop() ends the episode.
  virtual EnvAction next(const EpisodeView& view) = 0;
};

// Replays a fixed action list, then stops.
class ScriptedPolicy : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<EnvAction> script) : script_(std::move(script)) {}
  static ScriptedPolicy from_golden_path(const GoldenPathScript& golden);

  void begin_episode() override { pos_ = 0; }
  EnvAction next(const EpisodeView& view) override;

 private:
  std::vector<EnvAction> script_;
  std::size_t pos_ = 0;
};

// Uniform choice over an action catalog; never stops on its own.
class RandomPolicy : public Policy {
 public:
  RandomPolicy(std::vector<EnvAction> catalog, std::uint64_t seed);
  EnvAction next(const EpisodeView& view) override;

 private:
  std::vector<EnvAction> catalog_;
  std::mt19937_64 rng_;
};

struct RolloutOptions {
  std::size_t max_steps = 20;
  std::size_t excerpt_cap = kDefaultExcerptCap;
  std::chrono::milliseconds action_timeout{5000};
};

// Runs policy against a leased handle until it stops, max_steps actions have
// executed, or an event reaches reward 1.0. Transport failures end the
// episode and are recorded on the last step.
Trajectory run_episode(EnvPool& pool, const EnvHandle& handle, Policy& policy,
                       const RolloutOptions& options, const std::string& task_id = {});

// Leases a handle for bundle, runs one episode and releases the handle.
Trajectory run_bundle_episode(EnvPool& pool, const EnvBundle& bundle, Policy& policy,
                              const RolloutOptions& options);

inline constexpr double kAdvantageEpsilon = 1e-8;

// A_i = (r_i - mean) / (std + 1e-8) with population std; all zeros when the
// rewards are identical. Throws ContractError for fewer than two rewards.
std::vector<double> grpo_advantages(std::span<const double> rewards);

// Candidate actions for a page: links become navigate actions and forms
// become submit actions with their default field values.
std::vector<EnvAction> extract_actions(const std::string& html);

}  // namespace envforge
