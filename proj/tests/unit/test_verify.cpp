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

#include <memory>

#include "envforge/error.hpp"
#include "envforge/mock_provider.hpp"
#include "envforge/verify.hpp"
#include "testing.hpp"

using namespace envforge;
using namespace std::chrono_literals;

namespace {

constexpr std::uint16_t kPorts = 22000;

std::unique_ptr<testing::CannedProvider> answering(const std::string& answer) {
  auto p = std::make_unique<testing::CannedProvider>();
  p->on(PromptStage::kReflect, std::vector<std::string>{answer});
  return p;
}

}  // namespace

TEST_CASE("answer normalization") {
  CHECK(normalize_answer("  Yes. ") == "yes");
  CHECK(normalize_answer("\"YES!\"") == "yes");
  CHECK(normalize_answer("**no**\n") == "no");
  CHECK(normalize_answer("yes, but") == "yes, but");
  CHECK(normalize_answer("...").empty());
}

TEST_CASE("static reflection accepts only a plain yes") {
  const EnvBundle weather = testing::reference_bundle("weather");
  for (const char* yes : {"yes", "Yes.", " YES "}) {
    auto p = answering(yes);
    CHECK_MESSAGE(static_reflect(weather, *p), yes);
  }
  for (const char* no : {"no", "yeah", "yes, mostly", ""}) {
    auto p = answering(no);
    CHECK_MESSAGE(!static_reflect(weather, *p), no);
  }
}

TEST_CASE("reflection request carries the instruction and every file") {
  EnvBundle weather = testing::reference_bundle("weather");
  weather.attempt = 4;
  auto p = answering("yes");
  static_reflect(weather, *p);
  const auto reqs = p->requests();
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].stage == PromptStage::kReflect);
  CHECK(reqs[0].sample_index == 4);
  CHECK(reqs[0].user.find(weather.instruction) != std::string::npos);
  for (const auto& [path, content] : weather.files) {
    CHECK(reqs[0].context["files"][path] == content);
    CHECK(reqs[0].user.find("--- " + path + " ---") != std::string::npos);
  }
}

TEST_CASE("reflection retries transient failures") {
  MockProviderOptions o;
  o.transient_failures = 1;
  MockProvider flaky(o);
  CHECK(static_reflect(testing::reference_bundle("weather"), flaky));
  testing::CannedProvider silent;
  CHECK_THROWS_AS(static_reflect(testing::reference_bundle("weather"), silent),
                  ProviderUnavailable);
}

TEST_CASE("golden path passes on the reference environment") {
  EnvPool pool(testing::pool_config(kPorts));
  const EnvBundle weather = testing::reference_bundle("weather");
  const VerificationReport r = run_golden_path(weather, pool);
  CHECK(r.static_passed);
  CHECK(r.dynamic_passed);
  CHECK(r.failure_stage == VerifyFailure::kNone);
  REQUIRE(r.milestones.size() == weather.golden_path.steps.size());
  CHECK(r.milestones.back().observed == doctest::Approx(1.0));
  for (const auto& m : r.milestones) CHECK(m.met);
  CHECK(pool.live_count() <= 1);
  pool.shutdown();
}

TEST_CASE("sabotaged environment misses its final milestone") {
  EnvPool pool(testing::pool_config(kPorts));
  const VerificationReport r = run_golden_path(testing::reference_bundle("weather_sabotaged"), pool);
  CHECK_FALSE(r.dynamic_passed);
  CHECK(r.failure_stage == VerifyFailure::kMilestoneMissed);
  CHECK(r.detail.find("step 2") != std::string::npos);
  REQUIRE(r.milestones.size() == 3);
  CHECK_FALSE(r.milestones[2].met);
  CHECK(r.milestones[2].observed < 1.0);
  pool.shutdown();
}

TEST_CASE("spawn failure is reported with the child output") {
  EnvPool pool(testing::pool_config(kPorts));
  const VerificationReport r = run_golden_path(testing::reference_bundle("broken"), pool);
  CHECK_FALSE(r.dynamic_passed);
  CHECK(r.failure_stage == VerifyFailure::kSpawnFailed);
  CHECK(r.detail.find("SyntaxError") != std::string::npos);
}

TEST_CASE("a failing action stops the replay") {
  EnvPool pool(testing::pool_config(kPorts));
  EnvBundle weather = testing::reference_bundle("weather");
  weather.golden_path.steps[1].action = EnvAction::navigate("/definitely-missing");
  const VerificationReport r = run_golden_path(weather, pool);
  CHECK(r.failure_stage == VerifyFailure::kActionFailed);
  CHECK(r.detail.find("404") != std::string::npos);
  CHECK(r.milestones.size() == 1);
  CHECK_FALSE(r.dynamic_passed);
  pool.shutdown();
}

TEST_CASE("time budget exhaustion is a missed milestone") {
  EnvPool pool(testing::pool_config(kPorts));
  VerifyOptions o;
  o.total_timeout = 0ms;
  const VerificationReport r = run_golden_path(testing::reference_bundle("weather"), pool, o);
  CHECK(r.failure_stage == VerifyFailure::kMilestoneMissed);
  CHECK_FALSE(r.dynamic_passed);
  pool.shutdown();
}

TEST_CASE("empty golden path is a contract error") {
  EnvPool pool(testing::pool_config(kPorts));
  EnvBundle weather = testing::reference_bundle("weather");
  weather.golden_path = {};
  CHECK_THROWS_AS(run_golden_path(weather, pool), ContractError);
}

TEST_CASE("rejected reflection skips the dynamic test") {
  EnvPool pool(testing::pool_config(kPorts));
  auto p = answering("no");
  const VerificationReport r = evaluate_bundle(testing::reference_bundle("weather"), *p, pool);
  CHECK_FALSE(r.static_passed);
  CHECK_FALSE(r.dynamic_passed);
  CHECK(r.failure_stage == VerifyFailure::kReflectionRejected);
  CHECK(r.milestones.empty());
  CHECK(pool.live_count() == 0);
}

TEST_CASE("verify_bundle records the verdict") {
  EnvPool pool(testing::pool_config(kPorts));
  auto p = answering("yes");
  EnvBundle good = testing::reference_bundle("weather");
  good.verified = false;
  CHECK(verify_bundle(good, *p, pool).dynamic_passed);
  CHECK(good.verified);
  EnvBundle bad = testing::reference_bundle("weather_sabotaged");
  CHECK_FALSE(verify_bundle(bad, *p, pool).dynamic_passed);
  CHECK_FALSE(bad.verified);
  pool.shutdown();
}

TEST_CASE("cache shares a verdict across identical bundles") {
  EnvPool pool(testing::pool_config(kPorts));
  GoldenPathCache cache;
  EnvBundle a = testing::reference_bundle("weather");
  EnvBundle b = a;
  b.task_id = "weather_copy";
  b.attempt = 3;
  const auto ra = cache.run(a, pool);
  const auto rb = cache.run(b, pool);
  CHECK(cache.hits() == 1);
  CHECK(to_json(ra) == to_json(rb));
  b.files["app.py"] += "\n# changed\n";
  cache.run(b, pool);
  CHECK(cache.hits() == 1);
  pool.shutdown();
}

TEST_CASE("property: replays are repeatable") {
  EnvPool pool(testing::pool_config(kPorts));
  for (const char* name : {"weather", "burger", "ride", "weather_sabotaged"}) {
    const EnvBundle b = testing::reference_bundle(name);
    const auto first = run_golden_path(b, pool);
    const auto second = run_golden_path(b, pool);
    CHECK_MESSAGE(to_json(first) == to_json(second), name);
    CHECK(first.dynamic_passed == (std::string(name) != "weather_sabotaged"));
  }
  pool.shutdown();
}

TEST_CASE("report json shape") {
  VerificationReport r;
  r.static_passed = true;
  r.milestones.push_back({1, 0.5, 0.25, false});
  r.failure_stage = VerifyFailure::kMilestoneMissed;
  const auto j = to_json(r);
  CHECK(j["failure_stage"] == "milestone_missed");
  CHECK(j["milestones"][0]["expected"] == 0.5);
  CHECK(j["dynamic_passed"] == false);
}
