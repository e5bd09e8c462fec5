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

#include <doctest.h>

#include <cmath>
#include <random>

#include "envforge/error.hpp"
#include "envforge/training.hpp"
#include "testing.hpp"

using namespace envforge;

namespace {

constexpr std::uint16_t kPorts = 24000;

std::vector<EnvAction> dummy_catalog(std::size_t n) {
  std::vector<EnvAction> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(EnvAction::navigate("/a/" + std::to_string(k)));
  return out;
}

struct RandomProblem {
  std::vector<double> theta;
  std::vector<std::vector<std::size_t>> episodes;
  std::vector<double> advantages;
};

RandomProblem random_problem(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  RandomProblem p;
  p.theta.resize(2 + rng() % 8);
  for (auto& t : p.theta) t = n(rng);
  p.episodes.resize(2 + rng() % 5);
  for (auto& ep : p.episodes) {
    ep.resize(1 + rng() % 6);
    for (auto& k : ep) k = rng() % p.theta.size();
    p.advantages.push_back(n(rng));
  }
  return p;
}

}  // namespace

TEST_CASE("softmax basics") {
  const auto p = softmax(std::vector<double>{0.0, 0.0, 0.0, 0.0});
  for (double v : p) CHECK(v == doctest::Approx(0.25));
  const auto big = softmax(std::vector<double>{1000.0, 0.0});
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(big[1]));
  const auto shifted = softmax(std::vector<double>{3.0, 1.0, -2.0});
  const auto base = softmax(std::vector<double>{5.0, 3.0, 0.0});
  for (std::size_t k = 0; k < 3; ++k) CHECK(shifted[k] == doctest::Approx(base[k]));
  CHECK(softmax(std::vector<double>{}).empty());
}

TEST_CASE("property: softmax is a distribution") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> theta(1 + rng() % 12);
    for (auto& t : theta) t = n(rng);
    const auto p = softmax(theta);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches a closed form on one episode") {
  // One episode choosing index 0 twice, uniform logits over 2 actions.
  const std::vector<double> theta{0.0, 0.0};
  const auto g = policy_gradient(theta, {{0, 0}}, std::vector<double>{1.0});
  CHECK(g[0] == doctest::Approx(1.0));
  CHECK(g[1] == doctest::Approx(-1.0));
  const double ll = advantage_weighted_log_likelihood(theta, {{0, 0}}, std::vector<double>{1.0});
  CHECK(ll == doctest::Approx(2.0 * std::log(0.5)));
}

TEST_CASE("property: analytic gradient matches finite differences") {
  std::mt19937_64 rng(13);
  const double h = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    RandomProblem p = random_problem(rng);
    const auto g = policy_gradient(p.theta, p.episodes, p.advantages);
    for (std::size_t k = 0; k < p.theta.size(); ++k) {
      auto plus = p.theta, minus = p.theta;
      plus[k] += h;
      minus[k] -= h;
      const double fd = (advantage_weighted_log_likelihood(plus, p.episodes, p.advantages) -
                         advantage_weighted_log_likelihood(minus, p.episodes, p.advantages)) /
                        (2 * h);
      CHECK(std::abs(fd - g[k]) <= 1e-6 * std::max(1.0, std::abs(g[k])));
    }
  }
}

TEST_CASE("property: gradient components sum to zero") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    RandomProblem p = random_problem(rng);
    double sum = 0.0;
    for (double v : policy_gradient(p.theta, p.episodes, p.advantages)) sum += v;
    CHECK(std::abs(sum) <= 1e-9);
  }
}

TEST_CASE("gradient shape checks") {
  const std::vector<double> theta{0.0, 0.0};
  CHECK_THROWS_AS(policy_gradient(theta, {{0}}, std::vector<double>{1.0, 2.0}), ContractError);
  CHECK_THROWS_AS(policy_gradient(theta, {{2}}, std::vector<double>{1.0}), ContractError);
  CHECK_THROWS_AS(advantage_weighted_log_likelihood(theta, {{5}}, std::vector<double>{1.0}),
                  ContractError);
}

TEST_CASE("softmax policy samples its distribution") {
  SoftmaxPolicy policy(dummy_catalog(3), 99);
  policy.theta() = {std::log(0.5), std::log(0.3), std::log(0.2)};
  std::vector<EnvAction> none;
  std::vector<TrajectoryStep> steps;
  policy.begin_episode();
  const int n = 20000;
  for (int i = 0; i < n; ++i) policy.next(EpisodeView{steps, 0.0});
  std::vector<double> freq(3, 0.0);
  for (auto k : policy.taken()) freq[k] += 1.0 / n;
  const std::vector<double> expect{0.5, 0.3, 0.2};
  for (std::size_t k = 0; k < 3; ++k) {
    const double sd = std::sqrt(expect[k] * (1 - expect[k]) / n);
    CHECK(std::abs(freq[k] - expect[k]) <= 4 * sd);
  }
  policy.begin_episode();
  CHECK(policy.taken().empty());
  CHECK_THROWS_AS(SoftmaxPolicy({}, 1), ContractError);
}

TEST_CASE("reseeding reproduces a sample path") {
  SoftmaxPolicy a(dummy_catalog(5), 1);
  std::vector<TrajectoryStep> steps;
  a.reseed(42);
  a.begin_episode();
  for (int i = 0; i < 50; ++i) a.next(EpisodeView{steps, 0.0});
  const auto first = a.taken();
  a.reseed(42);
  a.begin_episode();
  for (int i = 0; i < 50; ++i) a.next(EpisodeView{steps, 0.0});
  CHECK(a.taken() == first);
}

TEST_CASE("training preconditions") {
  EnvPool pool(testing::pool_config(kPorts));
  const std::vector<EnvBundle> weather{testing::reference_bundle("weather")};
  TrainConfig c;
  c.group_size = 1;
  CHECK_THROWS_AS(train_toy_policy(pool, weather, c), ContractError);
  c = {};
  c.max_steps = 0;
  CHECK_THROWS_AS(train_toy_policy(pool, weather, c), ContractError);
  c = {};
  c.learning_rate = -1;
  CHECK_THROWS_AS(train_toy_policy(pool, weather, c), ContractError);
  CHECK_THROWS_AS(train_toy_policy(pool, {}, TrainConfig{}), ContractError);
  EnvBundle unverified = testing::reference_bundle("weather");
  unverified.verified = false;
  CHECK_THROWS_AS(train_toy_policy(pool, {unverified}, TrainConfig{}), ContractError);
}

TEST_CASE("policy catalog prefers the declared actions") {
  EnvPool pool(testing::pool_config(kPorts));
  const EnvBundle weather = testing::reference_bundle("weather");
  CHECK(policy_catalog(pool, weather) == *weather.action_catalog());
  EnvBundle bare = weather;
  bare.files.erase(std::string(kActionsFile));
  const auto found = policy_catalog(pool, bare);
  CHECK_FALSE(found.empty());
  pool.shutdown();
}

TEST_CASE("short training run is reproducible and zero rate is inert") {
  EnvPool pool(testing::pool_config(kPorts));
  const std::vector<EnvBundle> bundles{testing::reference_bundle("ride")};
  TrainConfig c;
  c.group_size = 3;
  c.iterations = 2;
  c.max_steps = 6;
  c.eval_episodes = 2;
  const TrainingReport a = train_toy_policy(pool, bundles, c);
  const TrainingReport b = train_toy_policy(pool, bundles, c);
  CHECK(to_json(a) == to_json(b));
  CHECK(a.iterations.size() == 2);
  CHECK(a.final_eval.per_env.size() == 1);
  REQUIRE(a.parameters.size() == 1);
  CHECK(a.parameters[0].second.size() == bundles[0].action_catalog()->size());

  c.learning_rate = 0.0;
  const TrainingReport z = train_toy_policy(pool, bundles, c);
  CHECK_FALSE(z.parameters_changed);
  for (const auto& [action, logit] : z.parameters[0].second) CHECK(logit == 0.0);
  pool.shutdown();
}
