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

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "envforge/error.hpp"
#include "envforge/reward.hpp"
#include "testing.hpp"

using namespace envforge;

namespace {

AssertionSpec burger_spec() {
  return AssertionSpec({{"has_beef_burger", 0.5, ""}, {"no_onion", 0.5, ""}});
}

std::vector<std::string> lines(std::initializer_list<const char*> items) {
  return {items.begin(), items.end()};
}

}  // namespace

TEST_CASE("weighted reward sums satisfied weights") {
  const AssertionSpec spec = burger_spec();
  CHECK(weighted_reward(spec, {{"has_beef_burger"}}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(weighted_reward(spec, {}) == 0.0);
  CHECK(weighted_reward(spec, {{"has_beef_burger", "no_onion"}}) == doctest::Approx(1.0));

  const AssertionSpec three({{"a", 0.3, ""}, {"b", 0.3, ""}, {"c", 0.4, ""}});
  CHECK(std::abs(weighted_reward(three, {{"a", "b", "c"}}) - 1.0) <= kRewardEpsilon);
}

TEST_CASE("weighted reward rejects unknown ids") {
  CHECK_THROWS_AS(weighted_reward(burger_spec(), {{"fries"}}), ContractError);
}

TEST_CASE("assertion spec invariants") {
  CHECK_THROWS_AS(AssertionSpec({{"a", 0.5, ""}, {"a", 0.5, ""}}), ValidationError);
  CHECK_THROWS_AS(AssertionSpec({{"a", 0.5, ""}, {"b", 0.4, ""}}), ValidationError);
  CHECK_THROWS_AS(AssertionSpec({{"a", 0.0, ""}, {"b", 1.0, ""}}), ValidationError);
  CHECK_THROWS_AS(AssertionSpec({{"a", 1.5, ""}, {"b", -0.5, ""}}), ValidationError);
  CHECK_NOTHROW(AssertionSpec({{"a", 1.0, ""}}));
}

TEST_CASE("property: weighted reward is monotone and normalized") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    std::vector<double> raw(n);
    double total = 0.0;
    for (auto& w : raw) total += (w = 0.05 + std::uniform_real_distribution<>(0, 1)(rng));
    std::vector<Assertion> list;
    double assigned = 0.0;
    for (int i = 0; i < n; ++i) {
      double w = i + 1 == n ? 1.0 - assigned : raw[i] / total;
      assigned += w;
      list.push_back({"g" + std::to_string(i), w, ""});
    }
    const AssertionSpec spec(list);
    StateSnapshot state;
    double prev = weighted_reward(spec, state);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (int i : order) {
      state.satisfied.insert("g" + std::to_string(i));
      const double now = weighted_reward(spec, state);
      CHECK(now >= prev);
      prev = now;
    }
    CHECK(std::abs(prev - 1.0) <= kRewardEpsilon);
  }
}

TEST_CASE("explanation attaches to the next reward line") {
  const auto s = parse_reward_stream(
      lines({"ACTION_EXPLANATION=User searching city", "RL_REWARD=0.3, NEXT=open detail"}),
      ParseMode::kStrict);
  REQUIRE(s.events.size() == 1);
  CHECK(s.events[0].reward == doctest::Approx(0.3));
  CHECK(s.events[0].next_hint == "open detail");
  CHECK(s.events[0].explanation == std::optional<std::string>("User searching city"));
  CHECK(s.malformed.empty());
}

TEST_CASE("empty input parses to an empty stream") {
  const std::vector<std::string> none;
  CHECK(parse_reward_stream(none, ParseMode::kStrict).empty());
  CHECK(parse_reward_stream(none, ParseMode::kLenient).empty());
}

TEST_CASE("strict and lenient diverge on spacing variants") {
  const auto in = lines({"RL_REWARD = 0.6 , NEXT=x"});
  const auto strict = parse_reward_stream(in, ParseMode::kStrict);
  CHECK(strict.events.empty());
  REQUIRE(strict.malformed.size() == 1);
  CHECK(strict.malformed[0].line_no == 1);

  const auto lenient = parse_reward_stream(in, ParseMode::kLenient);
  REQUIRE(lenient.events.size() == 1);
  CHECK(lenient.events[0].reward == doctest::Approx(0.6));
  CHECK(lenient.events[0].next_hint == "x");
}

TEST_CASE("decimal literal grammar") {
  for (const char* ok : {"RL_REWARD=0.3, NEXT=a", "RL_REWARD=1.0, NEXT=a",
                         "RL_REWARD=.5, NEXT=a", "RL_REWARD=1, NEXT=a"}) {
    const auto s = parse_reward_stream(lines({ok}), ParseMode::kStrict);
    CHECK_MESSAGE(s.events.size() == 1, ok);
  }
  for (const char* bad : {"RL_REWARD=, NEXT=a", "RL_REWARD=1., NEXT=a", "RL_REWARD=0.3,NEXT=a",
                          " RL_REWARD=0.3, NEXT=a", "RL_REWARD=abc, NEXT=a",
                          "RL_REWARD=0.3 NEXT=a"}) {
    const auto s = parse_reward_stream(lines({bad}), ParseMode::kStrict);
    CHECK_MESSAGE(s.events.empty(), bad);
    CHECK_MESSAGE(s.malformed.size() == 1, bad);
  }
}

TEST_CASE("lenient mode ignores unrelated log lines") {
  const auto s = parse_reward_stream(
      lines({"127.0.0.1 - GET /", "  ACTION_EXPLANATION = tapped  ", "RL_REWARD=0.5,NEXT=go"}),
      ParseMode::kLenient);
  REQUIRE(s.events.size() == 1);
  CHECK(s.events[0].explanation == std::optional<std::string>("tapped"));
  CHECK(s.malformed.empty());

  const auto strict = parse_reward_stream(lines({"127.0.0.1 - GET /"}), ParseMode::kStrict);
  CHECK(strict.malformed.size() == 1);
}

TEST_CASE("reward without explanation is accepted") {
  const auto s = parse_reward_stream(lines({"RL_REWARD=0.0, NEXT=start"}), ParseMode::kStrict);
  REQUIRE(s.events.size() == 1);
  CHECK_FALSE(s.events[0].explanation.has_value());
}

TEST_CASE("out-of-range rewards are clamped with a warning") {
  const auto s = parse_reward_stream(lines({"RL_REWARD=1.2, NEXT=a", "RL_REWARD=-0.5, NEXT=b"}),
                                     ParseMode::kLenient);
  REQUIRE(s.events.size() == 2);
  CHECK(s.events[0].reward == 1.0);
  CHECK(s.events[1].reward == 0.0);
  CHECK(s.warnings.size() == 2);
}

TEST_CASE("sequence numbers increase across feeds") {
  RewardStreamParser p(ParseMode::kStrict);
  p.feed("ACTION_EXPLANATION=first");
  auto a = p.take();
  CHECK(a.events.empty());
  p.feed("RL_REWARD=0.1, NEXT=a");
  p.feed("RL_REWARD=0.2, NEXT=b");
  auto b = p.take();
  REQUIRE(b.events.size() == 2);
  CHECK(b.events[0].explanation == std::optional<std::string>("first"));
  CHECK(b.events[0].seq < b.events[1].seq);
  CHECK(p.take().empty());
}

TEST_CASE("final reward is the last event") {
  auto make = [](std::vector<double> rs) {
    RewardStream s;
    std::uint64_t seq = 0;
    for (double r : rs) s.events.push_back({seq++, std::nullopt, r, ""});
    return s;
  };
  CHECK(final_reward(make({0.0, 0.3, 0.6, 1.0})) == 1.0);
  CHECK(final_reward(make({})) == 0.0);
  CHECK(final_reward(make({0.3, 0.6, 0.5})) == 0.5);
}

TEST_CASE("success threshold") {
  CHECK(classify_success(1.0));
  CHECK(classify_success(0.999999999));
  CHECK_FALSE(classify_success(0.5));
  CHECK_FALSE(classify_success(0.99999999));
}

TEST_CASE("formatted lines round-trip through the strict parser") {
  for (double r : {0.0, 0.3, 0.25, 1.0, 0.1234}) {
    const auto s = parse_reward_stream(std::vector<std::string>{format_reward_line(r, "n")},
                                       ParseMode::kStrict);
    REQUIRE(s.events.size() == 1);
    CHECK(s.events[0].reward == doctest::Approx(r));
  }
  CHECK(format_reward_line(1.0, "TERMINAL") == "RL_REWARD=1.0, NEXT=TERMINAL");
}

TEST_CASE("property: line accounting under fuzz") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> pieces{"RL_REWARD", "=", " ", ",", "NEXT", "0.", "5", "1",
                                        "ACTION_EXPLANATION", "\t", "-", "e", "x", "\xff"};
  for (ParseMode mode : {ParseMode::kStrict, ParseMode::kLenient}) {
    std::vector<std::string> in;
    for (int i = 0; i < 5000; ++i) {
      std::string line;
      const int n = static_cast<int>(rng() % 8);
      for (int k = 0; k < n; ++k) line += pieces[rng() % pieces.size()];
      in.push_back(line);
    }
    const auto s = parse_reward_stream(in, mode);
    std::size_t with_token = 0;
    for (const auto& l : in) with_token += l.find("RL_REWARD") != std::string::npos;
    std::size_t malformed_with_token = 0;
    for (const auto& m : s.malformed) malformed_with_token += m.raw.find("RL_REWARD") != std::string::npos;
    CHECK(s.events.size() + malformed_with_token == with_token);
    for (const auto& e : s.events) CHECK((e.reward >= 0.0 && e.reward <= 1.0));
  }
}

TEST_CASE("reference environment output is strict-clean") {
  // Lines exactly as the reference kit prints them.
  const auto s = parse_reward_stream(
      lines({"ACTION_EXPLANATION=App launched, home page loaded",
             "RL_REWARD=0.0, NEXT=Search for the target city",
             "ACTION_EXPLANATION=User searched for Lvliang",
             "RL_REWARD=0.3, NEXT=Open the Lvliang detail page",
             "ACTION_EXPLANATION=User opened the Lvliang weather detail",
             "RL_REWARD=1.0, NEXT=TERMINAL"}),
      ParseMode::kStrict);
  CHECK(s.malformed.empty());
  REQUIRE(s.events.size() == 3);
  CHECK(final_reward(s) == 1.0);
  CHECK(s.events[2].next_hint == "TERMINAL");
}

TEST_CASE("reward spec json round trip") {
  const AssertionSpec spec = burger_spec();
  const AssertionSpec back = assertion_spec_from_json(to_json(spec));
  CHECK(back.assertions().size() == 2);
  CHECK(back.weight_sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(assertion_spec_from_json(nlohmann::json::object()), ParseError);
}

TEST_CASE("fixture reward specs load") {
  for (const char* name : {"weather", "burger", "ride"}) {
    const auto bundle = testing::reference_bundle(name);
    REQUIRE(bundle.reward_spec.has_value());
    CHECK(bundle.reward_spec->weight_sum() == doctest::Approx(1.0));
  }
}
