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

#include "envforge/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "envforge/error.hpp"
#include "envforge/http.hpp"
#include "envforge/util.hpp"

namespace envforge {

using nlohmann::json;

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void check_shapes(std::span<const double> theta,
                  const std::vector<std::vector<std::size_t>>& episodes,
                  std::span<const double> advantages) {
  if (episodes.size() != advantages.size())
    throw ContractError("one advantage per episode required");
  for (const auto& ep : episodes)
    for (std::size_t k : ep)
      if (k >= theta.size()) throw ContractError("action index outside catalog");
}

}  // namespace

std::vector<double> softmax(std::span<const double> theta) {
  if (theta.empty()) return {};
  const double hi = *std::max_element(theta.begin(), theta.end());
  std::vector<double> p(theta.size());
  double z = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) z += p[k] = std::exp(theta[k] - hi);
  for (double& v : p) v /= z;
  return p;
}

SoftmaxPolicy::SoftmaxPolicy(std::vector<EnvAction> catalog, std::uint64_t seed)
    : catalog_(std::move(catalog)), theta_(catalog_.size(), 0.0), rng_(seed) {
  if (catalog_.empty()) throw ContractError("softmax policy needs a non-empty catalog");
}

std::vector<double> SoftmaxPolicy::probabilities() const { return softmax(theta_); }

EnvAction SoftmaxPolicy::next(const EpisodeView&) {
  const std::vector<double> p = probabilities();
  const double u = unit_uniform(rng_);
  double acc = 0.0;
  std::size_t k = p.size() - 1;
  for (std::size_t j = 0; j < p.size(); ++j) {
    acc += p[j];
    if (u < acc) {
      k = j;
      break;
    }
  }
  taken_.push_back(k);
  return catalog_[k];
}

double advantage_weighted_log_likelihood(
    std::span<const double> theta,
    const std::vector<std::vector<std::size_t>>& episodes,
    std::span<const double> advantages) {
  check_shapes(theta, episodes, advantages);
  const double hi = theta.empty() ? 0.0 : *std::max_element(theta.begin(), theta.end());
  double z = 0.0;
  for (double t : theta) z += std::exp(t - hi);
  const double log_z = hi + std::log(z);
  double total = 0.0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    double ll = 0.0;
    for (std::size_t k : episodes[i]) ll += theta[k] - log_z;
    total += advantages[i] * ll;
  }
  return total;
}

std::vector<double> policy_gradient(
    std::span<const double> theta,
    const std::vector<std::vector<std::size_t>>& episodes,
    std::span<const double> advantages) {
  check_shapes(theta, episodes, advantages);
  const std::vector<double> p = softmax(theta);
  std::vector<double> grad(theta.size(), 0.0);
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (advantages[i] == 0.0) continue;
    std::vector<double> counts(theta.size(), 0.0);
    for (std::size_t k : episodes[i]) counts[k] += 1.0;
    const double steps = static_cast<double>(episodes[i].size());
    for (std::size_t k = 0; k < theta.size(); ++k)
      grad[k] += advantages[i] * (counts[k] - steps * p[k]);
  }
  return grad;
}

double TrainingReport::initial_success() const {
  return iterations.empty() ? 0.0 : iterations.front().mean_success;
}

namespace {

json metrics_json(const IterationMetrics& m) {
  json envs = json::array();
  for (const auto& e : m.per_env)
    envs.push_back({{"task_id", e.task_id},
                    {"success_rate", e.success_rate},
                    {"mean_reward", e.mean_reward}});
  return {{"iteration", m.iteration},
          {"mean_success", m.mean_success},
          {"mean_reward", m.mean_reward},
          {"per_env", envs}};
}

struct EnvState {
  const EnvBundle* bundle;
  SoftmaxPolicy policy;
};

// Runs n episodes of each environment's policy; returns per-env rewards and
// chosen indices.
struct Sample {
  std::vector<double> rewards;
  std::vector<bool> success;
  std::vector<std::vector<std::size_t>> taken;
};

Sample sample_episodes(EnvPool& pool, EnvState& env, std::size_t n,
                       const RolloutOptions& opts, std::uint64_t seed) {
  Sample s;
  for (std::size_t e = 0; e < n; ++e) {
    env.policy.reseed(mix_seed(seed, e));
    Trajectory t = run_bundle_episode(pool, *env.bundle, env.policy, opts);
    s.rewards.push_back(t.final_reward);
    s.success.push_back(t.success);
    s.taken.push_back(env.policy.taken());
  }
  return s;
}

EnvMetrics summarize(const std::string& task_id, const Sample& s) {
  EnvMetrics m;
  m.task_id = task_id;
  if (s.rewards.empty()) return m;
  const double n = static_cast<double>(s.rewards.size());
  m.success_rate = std::count(s.success.begin(), s.success.end(), true) / n;
  m.mean_reward = std::accumulate(s.rewards.begin(), s.rewards.end(), 0.0) / n;
  return m;
}

void fold(IterationMetrics& m) {
  if (m.per_env.empty()) return;
  for (const auto& e : m.per_env) {
    m.mean_success += e.success_rate;
    m.mean_reward += e.mean_reward;
  }
  m.mean_success /= m.per_env.size();
  m.mean_reward /= m.per_env.size();
}

}  // namespace

json to_json(const TrainingReport& r) {
  json iters = json::array();
  for (const auto& m : r.iterations) iters.push_back(metrics_json(m));
  json params = json::object();
  for (const auto& [task, entries] : r.parameters) {
    json list = json::array();
    for (const auto& [action, logit] : entries)
      list.push_back({{"action", action}, {"logit", logit}});
    params[task] = list;
  }
  const TrainConfig& c = r.config;
  return {{"config",
           {{"group_size", c.group_size},
            {"iterations", c.iterations},
            {"learning_rate", c.learning_rate},
            {"max_steps", c.max_steps},
            {"seed", c.seed}}},
          {"iterations", iters},
          {"final_eval", metrics_json(r.final_eval)},
          {"initial_success", r.initial_success()},
          {"final_success", r.final_success()},
          {"parameters_changed", r.parameters_changed},
          {"parameters", params}};
}

std::vector<EnvAction> policy_catalog(EnvPool& pool, const EnvBundle& bundle) {
  if (auto declared = bundle.action_catalog(); declared && !declared->empty())
    return *declared;
  EnvHandle handle = pool.lease(bundle);
  std::vector<EnvAction> found;
  try {
    HttpRequest req;
    req.url = handle.base_url() + "/";
    found = extract_actions(http_send(req).body);
  } catch (...) {
    pool.release(handle);
    throw;
  }
  pool.release(handle);
  if (found.empty())
    throw ValidationError("no actions found for " + bundle.task_id);
  return found;
}

TrainingReport train_toy_policy(EnvPool& pool, const std::vector<EnvBundle>& bundles,
                                const TrainConfig& config) {
  if (bundles.empty()) throw ContractError("training needs at least one bundle");
  if (config.group_size < 2) throw ContractError("group_size must be at least 2");
  if (config.max_steps < 1) throw ContractError("max_steps must be >= 1");
  if (!(config.learning_rate >= 0.0)) throw ContractError("learning_rate must be >= 0");
  for (const auto& b : bundles)
    if (!b.verified && !config.allow_unverified)
      throw ContractError("bundle " + b.task_id + " is not verified");

  std::vector<EnvState> envs;
  for (std::size_t i = 0; i < bundles.size(); ++i)
    envs.push_back({&bundles[i], SoftmaxPolicy(policy_catalog(pool, bundles[i]),
                                               mix_seed(config.seed, i))});

  RolloutOptions opts;
  opts.max_steps = config.max_steps;

  TrainingReport report;
  report.config = config;
  const double g = static_cast<double>(config.group_size);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    IterationMetrics m;
    m.iteration = it;
    for (std::size_t i = 0; i < envs.size(); ++i) {
      const std::uint64_t seed = mix_seed(mix_seed(config.seed, i), it + 1);
      Sample s = sample_episodes(pool, envs[i], config.group_size, opts, seed);
      m.per_env.push_back(summarize(envs[i].bundle->task_id, s));
      const std::vector<double> adv = grpo_advantages(s.rewards);
      const std::vector<double> grad =
          policy_gradient(envs[i].policy.theta(), s.taken, adv);
      auto& theta = envs[i].policy.theta();
      for (std::size_t k = 0; k < theta.size(); ++k)
        theta[k] += config.learning_rate / g * grad[k];
    }
    fold(m);
    report.iterations.push_back(std::move(m));
  }

  const std::size_t n_eval = config.eval_episodes ? config.eval_episodes : config.group_size;
  report.final_eval.iteration = config.iterations;
  for (std::size_t i = 0; i < envs.size(); ++i) {
    const std::uint64_t seed = mix_seed(mix_seed(config.seed, i), 0xe7a1ULL);
    Sample s = sample_episodes(pool, envs[i], n_eval, opts, seed);
    report.final_eval.per_env.push_back(summarize(envs[i].bundle->task_id, s));
  }
  fold(report.final_eval);

  for (const auto& env : envs) {
    std::vector<std::pair<std::string, double>> entries;
    const auto& theta = env.policy.theta();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      entries.emplace_back(env.policy.catalog()[k].describe(), theta[k]);
      if (theta[k] != 0.0) report.parameters_changed = true;
    }
    report.parameters.emplace_back(env.bundle->task_id, std::move(entries));
  }
  return report;
}

}  // namespace envforge
