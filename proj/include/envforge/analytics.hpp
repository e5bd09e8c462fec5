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
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "envforge/rollout.hpp"
#include "envforge/synthesis.hpp"

namespace envforge {

// Renders a currency amount with two decimals and thousands separators.
std::string format_currency(double amount);

enum class Regime { kReal, kSynth };

std::string_view to_string(Regime regime);
Regime regime_from_string(std::string_view text);

// Unit costs and timings of the real-device and synthesized regimes.
struct CostModel {
  double verifier_cost_per_trajectory = 0.005;
  double device_cost_per_minute = 0.17;
  double synth_verifier_cost = 0.0;
  double synth_infra_cost = 0.0;  // per minute
  double rollout_hours_real = 0.2272;
  double rollout_hours_synth = 0.1013;
  double interaction_s_real = 4.81;
  double interaction_s_synth = 0.42;

  // Costs >= 0, durations > 0. Throws ContractError.
  void validate() const;
};

// Published headline figures the computed values are compared against.
inline constexpr double kReferenceEpochCost = 28000.0;
inline constexpr double kReferenceDailyCost = 24000.0;

struct CostReport {
  Regime regime = Regime::kReal;
  long long n_envs = 0;
  long long rollouts_per_env = 0;
  long long trajectories = 0;
  double rollout_hours = 0.0;
  double device_cost = 0.0;
  double verifier_cost = 0.0;
  double total = 0.0;
  // Reference figure and (total - reference) / reference; real regime only.
  double reference = 0.0;
  double residual = 0.0;
};

CostReport epoch_cost(const CostModel& model, long long n_envs, long long rollouts_per_env,
                      Regime regime);

// n_devices * hours * 60 * device_cost_per_minute.
double concurrent_device_cost(const CostModel& model, long long n_devices, double hours);

struct AttemptHistogram {
  std::size_t jobs = 0;
  std::map<int, std::size_t> per_attempt_count;
  std::map<int, double> per_attempt_fraction;
  std::size_t fail_count = 0;
  double fail_fraction = 0.0;
  // Failure-stage counts over every rejected attempt.
  std::map<std::string, std::size_t> failure_stages;
};

AttemptHistogram attempt_histogram(std::span<const AttemptLog> logs);

struct AlignmentRecord {
  int vlm_label = 0;  // 0 or 1
  double code_reward = 0.0;
};

// Parses "vlm_label,code_reward" CSV. Throws ParseError with the line number.
std::vector<AlignmentRecord> read_alignment_csv(std::istream& in);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

// Quantile with linear interpolation between closest ranks; values sorted.
double quantile_sorted(std::span<const double> sorted, double q);
Summary summarize(std::vector<double> values);

struct ClassAlignment {
  int label = 0;
  std::size_t count = 0;
  Summary rewards;
  double frac_le_0_6 = 0.0;
  double frac_gt_0_8 = 0.0;
  // Ten bins of width 0.1; the last one includes 1.0.
  std::vector<std::size_t> histogram = std::vector<std::size_t>(10, 0);
};

struct AlignmentReport {
  ClassAlignment failure = make(0);
  ClassAlignment success = make(1);

 private:
  static ClassAlignment make(int label) {
    ClassAlignment c;
    c.label = label;
    return c;
  }
};

// Throws ContractError for a label outside {0, 1} or a reward outside [0, 1].
AlignmentReport reward_alignment(std::span<const AlignmentRecord> records);

struct LengthReport {
  std::size_t clip = 0;
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t removed = 0;
  double mean = 0.0;
  std::map<std::size_t, std::size_t> histogram;
};

// Drops lengths strictly greater than clip, as clip_traces does.
LengthReport length_distribution(std::span<const std::size_t> lengths, std::size_t clip);
LengthReport length_distribution(std::span<const Trajectory> trajectories, std::size_t clip);

struct LatencyReport {
  Summary per_interaction_s;
  Summary per_rollout_h;
  std::size_t excluded = 0;
  std::vector<std::string> warnings;
};

// Per-interaction time is wall_clock_s / step_count; trajectories with no
// steps are excluded with a warning.
LatencyReport latency_stats(std::span<const Trajectory> trajectories);

nlohmann::json to_json(const CostReport& report);
nlohmann::json to_json(const AttemptHistogram& report);
nlohmann::json to_json(const Summary& summary);
nlohmann::json to_json(const AlignmentReport& report);
nlohmann::json to_json(const LengthReport& report);
nlohmann::json to_json(const LatencyReport& report);

std::string render_table(const CostReport& report);
std::string render_table(const AttemptHistogram& report);
std::string render_table(const AlignmentReport& report);
std::string render_table(const LengthReport& report);
std::string render_table(const LatencyReport& report);

}  // namespace envforge
