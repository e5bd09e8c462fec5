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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace envforge {

// Tolerance for "reward reached 1.0" and for weight normalization.
inline constexpr double kRewardEpsilon = 1e-9;

struct Assertion {
  std::string id;
  double weight = 0.0;
  std::string description;
};

// Weighted executable assertions over backend state. The two-goal form
//   r = a * I(goal_1) + (1 - a) * I(goal_2)
// generalizes to r = sum of w_i over satisfied assertions, sum(w_i) = 1.
class AssertionSpec {
 public:
  AssertionSpec() = default;
  // Throws ValidationError unless ids are unique, each weight is in (0, 1],
  // and the weights sum to 1 within kRewardEpsilon.
  explicit AssertionSpec(std::vector<Assertion> assertions);

  const std::vector<Assertion>& assertions() const noexcept {
    return assertions_;
  }
  bool contains(std::string_view id) const;
  double weight_sum() const;
  bool empty() const noexcept { return assertions_.empty(); }

 private:
  std::vector<Assertion> assertions_;
};

nlohmann::json to_json(const AssertionSpec& spec);
AssertionSpec assertion_spec_from_json(const nlohmann::json& j);

struct StateSnapshot {
  std::set<std::string> satisfied;
};

// Sum of weights of satisfied assertions. Throws ContractError when the
// snapshot names an id the spec does not declare.
double weighted_reward(const AssertionSpec& spec, const StateSnapshot& state);

struct RewardEvent {
  std::uint64_t seq = 0;
  std::optional<std::string> explanation;
  double reward = 0.0;
  std::string next_hint;
};

struct MalformedLine {
  std::size_t line_no = 0;  // 1-based within the parser's input
  std::string raw;
};

struct RewardWarning {
  std::size_t line_no = 0;
  std::string message;
};

struct RewardStream {
  std::vector<RewardEvent> events;
  std::vector<MalformedLine> malformed;
  std::vector<RewardWarning> warnings;

  bool empty() const noexcept { return events.empty(); }
  void append(const RewardStream& other);
};

enum class ParseMode { kStrict, kLenient };

std::string_view to_string(ParseMode mode);
ParseMode parse_mode_from_string(std::string_view text);

// Incremental parser for the environment stdout protocol:
//
//   ACTION_EXPLANATION=<text to end of line>
//   RL_REWARD=<decimal>, NEXT=<text to end of line>
//
// An explanation attaches to the next reward line, even across feed() calls.
// A line that mentions RL_REWARD is always either an event or malformed.
// Strict mode records every other non-conforming line as malformed; lenient
// mode tolerates whitespace and ignores lines carrying neither token.
class RewardStreamParser {
 public:
  explicit RewardStreamParser(ParseMode mode = ParseMode::kLenient)
      : mode_(mode) {}

  void feed(std::string_view line);
  // Returns everything parsed since the previous take().
  RewardStream take();

  ParseMode mode() const noexcept { return mode_; }
  std::size_t lines_seen() const noexcept { return line_no_; }

 private:
  ParseMode mode_;
  std::size_t line_no_ = 0;
  std::uint64_t next_seq_ = 0;
  std::optional<std::string> pending_explanation_;
  RewardStream out_;
};

RewardStream parse_reward_stream(std::span<const std::string> lines,
                                 ParseMode mode);

// Outcome reward: the last emitted value, 0.0 for an empty stream.
double final_reward(const RewardStream& stream);

bool classify_success(double reward);

// Renders a reward line in the strict wire format.
std::string format_reward_line(double reward, std::string_view next_hint);

nlohmann::json to_json(const RewardEvent& event);

}  // namespace envforge
