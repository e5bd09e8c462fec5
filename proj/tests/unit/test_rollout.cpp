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
#include <numeric>
#include <random>
#include <sstream>

#include "envforge/error.hpp"
#include "envforge/rollout.hpp"
#include "testing.hpp"

using namespace envforge;

namespace {

constexpr std::uint16_t kPorts = 23000;

// Two-pass reference: mean, then population variance.
std::vector<double> reference_advantages(const std::vector<double>& r) {
  long double mean = 0;
  for (double x : r) mean += x;
  mean /= r.size();
  long double var = 0;
  for (double x : r) var += (x - mean) * (x - mean);
  const long double sd = std::sqrt(var / r.size());
  std::vector<double> out;
  for (double x : r)
    out.push_back(sd == 0 ? 0.0 : static_cast<double>((x - mean) / (sd + 1e-8L)));
  return out;
}

}  // namespace

TEST_CASE("group advantages on small groups") {
  const auto a = grpo_advantages(std::vector<double>{0.0, 1.0});
  CHECK(a[0] == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(a[1] == doctest::Approx(1.0).epsilon(1e-7));
  const auto z = grpo_advantages(std::vector<double>{0.4, 0.4, 0.4});
  CHECK(z == std::vector<double>{0.0, 0.0, 0.0});
  CHECK_THROWS_AS(grpo_advantages(std::vector<double>{1.0}), ContractError);
  CHECK_THROWS_AS(grpo_advantages(std::vector<double>{}), ContractError);
}

TEST_CASE("property: group advantages match the reference and are centered") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> r(2 + rng() % 15);
    for (auto& x : r) x = (rng() % 4 == 0) ? 1.0 : std::round(u(rng) * 10) / 10;
    const auto a = grpo_advantages(r);
    const auto ref = reference_advantages(r);
    REQUIRE(a.size() == r.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::abs(a[i] - ref[i]) <= 1e-9);
      sum += a[i];
    }
    CHECK(std::abs(sum) <= 1e-9);
    // Ordering of rewards carries over to advantages.
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = 0; j < r.size(); ++j)
        if (r[i] > r[j]) CHECK(a[i] > a[j]);
  }
}

TEST_CASE("property: group advantages ignore affine reward shifts") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> r(3 + rng() % 6);
    for (auto& x : r) x = static_cast<double>(rng() % 11) / 10.0;
    std::vector<double> shifted = r;
    for (auto& x : shifted) x = 0.5 * x + 0.25;
    const auto a = grpo_advantages(r);
    const auto b = grpo_advantages(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-6);
  }
}

TEST_CASE("action extraction from markup") {
  const std::string html = R"(<html><body>
    <a href="/city/1">One</a> <a class="x" href='/city/2'>Two</a> <a href="https://example.com">out</a>
    <a href="/city/1">dup</a>
    <form action="/search" method="post"><input name="city" value="Lv liang"><input type="submit"></form>
    <form action="/filter" method="get"><select name="k"></select></form>
    <form method="post"><input name="orphan"></form>
  </body></html>)";
  const auto actions = extract_actions(html);
  REQUIRE(actions.size() == 4);
  CHECK(actions[0] == EnvAction::navigate("/city/1"));
  CHECK(actions[1] == EnvAction::navigate("/city/2"));
  CHECK(actions[2] == EnvAction::submit("/search", "city=Lv+liang"));
  CHECK(actions[3] == EnvAction::navigate("/filter"));
  CHECK(extract_actions("").empty());
}

TEST_CASE("scripted golden episode succeeds") {
  EnvPool pool(testing::pool_config(kPorts));
  for (const char* name : {"weather", "burger", "ride"}) {
    const EnvBundle b = testing::reference_bundle(name);
    ScriptedPolicy policy = ScriptedPolicy::from_golden_path(b.golden_path);
    const Trajectory t = run_bundle_episode(pool, b, policy, {});
    CHECK_MESSAGE(t.success, name);
    CHECK(t.final_reward == doctest::Approx(1.0));
    CHECK(t.step_count == t.steps.size());
    CHECK(t.step_count <= b.golden_path.steps.size());
    CHECK(t.task_id == b.task_id);
    // The launch event opens every episode at 0.
    const RewardStream all = t.events();
    REQUIRE_FALSE(all.events.empty());
    CHECK(all.events.front().reward == 0.0);
  }
  pool.shutdown();
}

TEST_CASE("episode ends once the reward reaches 1") {
  EnvPool pool(testing::pool_config(kPorts));
  const EnvBundle weather = testing::reference_bundle("weather");
  std::vector<EnvAction> script;
  for (const auto& s : weather.golden_path.steps) script.push_back(s.action);
  script.push_back(EnvAction::navigate("/"));
  script.push_back(EnvAction::navigate("/"));
  ScriptedPolicy policy(script);
  const Trajectory t = run_bundle_episode(pool, weather, policy, {});
  CHECK(t.success);
  CHECK(t.step_count == weather.golden_path.steps.size());
  pool.shutdown();
}

TEST_CASE("typed text is sent with the next submit") {
  EnvPool pool(testing::pool_config(kPorts));
  const EnvBundle weather = testing::reference_bundle("weather");
  ScriptedPolicy policy({EnvAction::navigate("/"), EnvAction::type_text("city", "Lvliang"),
                         EnvAction::submit("/search", ""), EnvAction::navigate("/city/1")});
  const Trajectory t = run_bundle_episode(pool, weather, policy, {});
  REQUIRE(t.steps.size() == 4);
  CHECK(t.steps[1].observation.client_side);
  CHECK(t.success);
  pool.shutdown();
}

TEST_CASE("random policy respects the step bound") {
  EnvPool pool(testing::pool_config(kPorts));
  const EnvBundle counter = testing::reference_bundle("counter");
  RandomPolicy policy({EnvAction::navigate("/"), EnvAction::navigate("/emit?n=1")}, 3);
  RolloutOptions o;
  o.max_steps = 7;
  const Trajectory t = run_bundle_episode(pool, counter, policy, o);
  CHECK(t.step_count == 7);
  CHECK_FALSE(t.success);
  o.max_steps = 0;
  CHECK_THROWS_AS(run_bundle_episode(pool, counter, policy, o), ContractError);
  CHECK_THROWS_AS(RandomPolicy({}, 1), ContractError);
  pool.shutdown();
}

TEST_CASE("transport failure ends the episode on the failing step") {
  EnvPool pool(testing::pool_config(kPorts));
  const EnvBundle counter = testing::reference_bundle("counter");
  ScriptedPolicy policy({EnvAction::navigate("/exit"), EnvAction::navigate("/emit?n=1"),
                         EnvAction::navigate("/emit?n=1")});
  RolloutOptions o;
  o.action_timeout = std::chrono::milliseconds(1000);
  const Trajectory t = run_bundle_episode(pool, counter, policy, o);
  REQUIRE(t.steps.size() == 2);
  CHECK_FALSE(t.steps[0].error.has_value());
  CHECK(t.steps[1].error.has_value());
  CHECK(t.steps[1].observation.status_class == "none");
  pool.shutdown();
}

TEST_CASE("trajectory dump round trip") {
  EnvPool pool(testing::pool_config(kPorts));
  const EnvBundle ride = testing::reference_bundle("ride");
  ScriptedPolicy policy = ScriptedPolicy::from_golden_path(ride.golden_path);
  const Trajectory t = run_bundle_episode(pool, ride, policy, {});
  pool.shutdown();

  std::stringstream buf;
  buf << to_json(t).dump() << "\n\n" << to_json(t).dump() << "\n";
  const auto back = read_trajectories(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[0].task_id == t.task_id);
  CHECK(back[0].final_reward == t.final_reward);
  CHECK(back[0].success == t.success);
  CHECK(back[0].step_count == t.step_count);
  REQUIRE(back[0].steps.size() == t.steps.size());
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    CHECK(back[0].steps[i].action == t.steps[i].action);
    CHECK(back[0].steps[i].observation.status == t.steps[i].observation.status);
    CHECK(back[0].steps[i].events.events.size() == t.steps[i].events.events.size());
  }

  std::stringstream bad("{\"task_id\": 1}\n");
  CHECK_THROWS_AS(read_trajectories(bad), ParseError);
}
