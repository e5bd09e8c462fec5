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

#include "envforge/reward.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "envforge/error.hpp"

namespace envforge {

using nlohmann::json;

AssertionSpec::AssertionSpec(std::vector<Assertion> assertions)
    : assertions_(std::move(assertions)) {
  if (assertions_.empty())
    throw ValidationError("assertion spec must declare at least one assertion");
  std::unordered_set<std::string> ids;
  for (const auto& a : assertions_) {
    if (a.id.empty()) throw ValidationError("assertion id must not be empty");
    if (!ids.insert(a.id).second)
      throw ValidationError("duplicate assertion id '" + a.id + "'");
    if (!(a.weight > 0.0 && a.weight <= 1.0))
      throw ValidationError("assertion '" + a.id + "' weight outside (0, 1]");
  }
  if (std::abs(weight_sum() - 1.0) > kRewardEpsilon)
    throw ValidationError("assertion weights must sum to 1");
}

bool AssertionSpec::contains(std::string_view id) const {
  return std::any_of(assertions_.begin(), assertions_.end(),
                     [&](const Assertion& a) { return a.id == id; });
}

double AssertionSpec::weight_sum() const {
  double sum = 0.0;
  for (const auto& a : assertions_) sum += a.weight;
  return sum;
}

json to_json(const AssertionSpec& spec) {
  json list = json::array();
  for (const auto& a : spec.assertions())
    list.push_back(
        {{"id", a.id}, {"weight", a.weight}, {"description", a.description}});
  return {{"assertions", list}};
}

AssertionSpec assertion_spec_from_json(const json& j) {
  try {
    std::vector<Assertion> list;
    for (const auto& a : j.at("assertions"))
      list.push_back({a.at("id").get<std::string>(), a.at("weight").get<double>(),
                      a.value("description", std::string())});
    return AssertionSpec(std::move(list));
  } catch (const json::exception& e) {
    throw ParseError(std::string("reward spec: ") + e.what());
  }
}

double weighted_reward(const AssertionSpec& spec, const StateSnapshot& state) {
  for (const auto& id : state.satisfied)
    if (!spec.contains(id))
      throw ContractError("state references unknown assertion '" + id + "'");
  double r = 0.0;
  for (const auto& a : spec.assertions())
    if (state.satisfied.count(a.id)) r += a.weight;
  return std::clamp(r, 0.0, 1.0);
}

void RewardStream::append(const RewardStream& other) {
  events.insert(events.end(), other.events.begin(), other.events.end());
  malformed.insert(malformed.end(), other.malformed.begin(),
                   other.malformed.end());
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

std::string_view to_string(ParseMode mode) {
  return mode == ParseMode::kStrict ? "strict" : "lenient";
}

ParseMode parse_mode_from_string(std::string_view text) {
  if (text == "strict") return ParseMode::kStrict;
  if (text == "lenient") return ParseMode::kLenient;
  throw ParseError("unknown parse mode '" + std::string(text) + "'");
}

namespace {

constexpr std::string_view kRewardToken = "RL_REWARD";
constexpr std::string_view kExplanationToken = "ACTION_EXPLANATION";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

void skip_spaces(std::string_view& s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
}

bool consume(std::string_view& s, std::string_view prefix) {
  if (!s.starts_with(prefix)) return false;
  s.remove_prefix(prefix.size());
  return true;
}

// digits? ('.')? digits  -- "0.3", "1.0", ".5", "7"
std::optional<std::string_view> take_strict_decimal(std::string_view& s) {
  std::size_t i = 0;
  while (i < s.size() && is_digit(s[i])) ++i;
  const std::size_t int_digits = i;
  if (i < s.size() && s[i] == '.') {
    ++i;
    const std::size_t frac_start = i;
    while (i < s.size() && is_digit(s[i])) ++i;
    if (i == frac_start) return std::nullopt;
  } else if (int_digits == 0) {
    return std::nullopt;
  }
  auto literal = s.substr(0, i);
  s.remove_prefix(i);
  return literal;
}

// [+-]? (digits ('.' digits*)? | '.' digits) ([eE] [+-]? digits)?
std::optional<std::string_view> take_lenient_decimal(std::string_view& s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  const std::size_t mantissa = i;
  while (i < s.size() && is_digit(s[i])) ++i;
  bool any = i > mantissa;
  if (i < s.size() && s[i] == '.') {
    ++i;
    const std::size_t frac = i;
    while (i < s.size() && is_digit(s[i])) ++i;
    any = any || i > frac;
  }
  if (!any) return std::nullopt;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    std::size_t j = i + 1;
    if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
    const std::size_t exp = j;
    while (j < s.size() && is_digit(s[j])) ++j;
    if (j > exp) i = j;
  }
  auto literal = s.substr(0, i);
  s.remove_prefix(i);
  return literal;
}

std::optional<double> to_double(std::string_view literal) {
  bool negative = false;
  if (!literal.empty() && (literal.front() == '+' || literal.front() == '-')) {
    negative = literal.front() == '-';
    literal.remove_prefix(1);
  }
  // from_chars does not accept "5." so append a zero for that spelling.
  std::string buf(literal);
  if (!buf.empty() && buf.back() == '.') buf.push_back('0');
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc() || ptr != buf.data() + buf.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return negative ? -value : value;
}

struct ParsedReward {
  double value;
  std::string next;
};

std::optional<ParsedReward> parse_reward_line(std::string_view line,
                                              ParseMode mode) {
  if (mode == ParseMode::kStrict) {
    if (!consume(line, "RL_REWARD=")) return std::nullopt;
    auto literal = take_strict_decimal(line);
    if (!literal || !consume(line, ", NEXT=")) return std::nullopt;
    auto value = to_double(*literal);
    if (!value) return std::nullopt;
    return ParsedReward{*value, std::string(line)};
  }
  line = trim(line);
  if (!consume(line, kRewardToken)) return std::nullopt;
  skip_spaces(line);
  if (!consume(line, "=")) return std::nullopt;
  skip_spaces(line);
  auto literal = take_lenient_decimal(line);
  if (!literal) return std::nullopt;
  skip_spaces(line);
  if (!consume(line, ",")) return std::nullopt;
  skip_spaces(line);
  if (!consume(line, "NEXT")) return std::nullopt;
  skip_spaces(line);
  if (!consume(line, "=")) return std::nullopt;
  auto value = to_double(*literal);
  if (!value) return std::nullopt;
  return ParsedReward{*value, std::string(trim(line))};
}

std::optional<std::string> parse_explanation_line(std::string_view line,
                                                  ParseMode mode) {
  if (mode == ParseMode::kStrict) {
    if (!consume(line, "ACTION_EXPLANATION=")) return std::nullopt;
    return std::string(line);
  }
  line = trim(line);
  if (!consume(line, kExplanationToken)) return std::nullopt;
  skip_spaces(line);
  if (!consume(line, "=")) return std::nullopt;
  return std::string(trim(line));
}

}  // namespace

void RewardStreamParser::feed(std::string_view line) {
  ++line_no_;
  const bool has_reward = line.find(kRewardToken) != std::string_view::npos;

  if (has_reward) {
    auto parsed = parse_reward_line(line, mode_);
    if (!parsed) {
      out_.malformed.push_back({line_no_, std::string(line)});
      return;
    }
    double value = parsed->value;
    if (value < 0.0 || value > 1.0) {
      out_.warnings.push_back(
          {line_no_, "reward " + std::string(trim(line)) + " clamped to [0, 1]"});
      value = std::clamp(value, 0.0, 1.0);
    }
    out_.events.push_back({next_seq_++, std::move(pending_explanation_), value,
                           std::move(parsed->next)});
    pending_explanation_.reset();
    return;
  }

  if (auto text = parse_explanation_line(line, mode_)) {
    pending_explanation_ = std::move(*text);
    return;
  }

  const bool has_explanation =
      line.find(kExplanationToken) != std::string_view::npos;
  if (mode_ == ParseMode::kStrict || has_explanation)
    out_.malformed.push_back({line_no_, std::string(line)});
}

RewardStream RewardStreamParser::take() {
  RewardStream out = std::move(out_);
  out_ = RewardStream{};
  return out;
}

RewardStream parse_reward_stream(std::span<const std::string> lines,
                                 ParseMode mode) {
  RewardStreamParser parser(mode);
  for (const auto& line : lines) parser.feed(line);
  return parser.take();
}

double final_reward(const RewardStream& stream) {
  return stream.events.empty() ? 0.0 : stream.events.back().reward;
}

bool classify_success(double reward) { return reward >= 1.0 - kRewardEpsilon; }

std::string format_reward_line(double reward, std::string_view next_hint) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", std::clamp(reward, 0.0, 1.0));
  std::string text(buf);
  while (text.size() > 3 && text.back() == '0' && text[text.size() - 2] != '.')
    text.pop_back();
  return "RL_REWARD=" + text + ", NEXT=" + std::string(next_hint);
}

json to_json(const RewardEvent& event) {
  json j{{"seq", event.seq}, {"reward", event.reward}, {"next", event.next_hint}};
  j["explanation"] = event.explanation ? json(*event.explanation) : json();
  return j;
}

}  // namespace envforge
