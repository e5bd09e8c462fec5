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

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "envforge/action.hpp"
#include "envforge/bundle.hpp"
#include "envforge/envpool.hpp"
#include "envforge/rollout.hpp"

namespace envforge {

// State-independent softmax over a fixed action catalog:
// pi(k) = exp(theta_k) / sum_j exp(theta_j).
class SoftmaxPolicy : public Policy {
 public:
  SoftmaxPolicy(std::vector<EnvAction> catalog, std::uint64_t seed);

  void begin_episode() override { taken_.clear(); }
  EnvAction next(const EpisodeView& view) override;

  void reseed(std::uint64_t seed) { rng_.seed(seed); }
  const std::vector<EnvAction>& catalog() const noexcept { return catalog_; }
  std::vector<double>& theta() noexcept { return theta_; }
  const std::vector<double>& theta() const noexcept { return theta_; }
  std::vector<double> probabilities() const;
  // Catalog indices sampled since begin_episode().
  const std::vector<std::size_t>& taken() const noexcept { return taken_; }

 private:
  std::vector<EnvAction> catalog_;
  std::vector<double> theta_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> taken_;
};

std::vector<double> softmax(std::span<const double> theta);

// sum_i A_i * sum_t log pi(a_{i,t}), the surrogate whose gradient drives the
// update. episodes[i] lists the catalog indices chosen in episode i.
double advantage_weighted_log_likelihood(
    std::span<const double> theta,
    const std::vector<std::vector<std::size_t>>& episodes,
    std::span<const double> advantages);

// Analytic gradient of the surrogate:
// d/dtheta_k = sum_i A_i * sum_t (1[a_{i,t} = k] - pi_k).
std::vector<double> policy_gradient(
    std::span<const double> theta,
    const std::vector<std::vector<std::size_t>>& episodes,
    std::span<const double> advantages);

struct TrainConfig {
  std::size_t group_size = 8;
  std::size_t iterations = 30;
  double learning_rate = 0.5;
  std::size_t max_steps = 20;
  std::uint64_t seed = 7;
  // Episodes per environment in the closing evaluation; 0 uses group_size.
  std::size_t eval_episodes = 0;
  bool allow_unverified = false;
};

struct EnvMetrics {
  std::string task_id;
  double success_rate = 0.0;
  double mean_reward = 0.0;
};

struct IterationMetrics {
  std::size_t iteration = 0;
  double mean_success = 0.0;
  double mean_reward = 0.0;
  std::vector<EnvMetrics> per_env;
};

struct TrainingReport {
  TrainConfig config;
  std::vector<IterationMetrics> iterations;
  // Evaluation after the last update.
  IterationMetrics final_eval;
  // Per environment: catalog entries with their final logits.
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>> parameters;
  bool parameters_changed = false;

  double initial_success() const;
  double final_success() const { return final_eval.mean_success; }
};

nlohmann::json to_json(const TrainingReport& report);

// The catalog a toy policy chooses from: actions.json when the bundle ships
// one, otherwise links and forms found on the landing page.
std::vector<EnvAction> policy_catalog(EnvPool& pool, const EnvBundle& bundle);

// Group-relative policy improvement over one softmax policy per bundle.
// Each iteration samples group_size episodes per bundle, turns their final
// rewards into group advantages and applies
// theta += lr / G * policy_gradient(...). Every step of an episode shares
// the episode's advantage. No timing data enters the report, so a fixed
// seed reproduces it exactly.
TrainingReport train_toy_policy(EnvPool& pool, const std::vector<EnvBundle>& bundles,
                                const TrainConfig& config);

}  // namespace envforge
