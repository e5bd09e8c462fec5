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

#include "envforge/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <sstream>

#include "envforge/error.hpp"
#include "envforge/util.hpp"

namespace envforge {

using nlohmann::json;

std::string format_currency(double amount) {
  const long long cents = std::llround(std::fabs(amount) * 100.0);
  std::string whole = std::to_string(cents / 100);
  for (int i = static_cast<int>(whole.size()) - 3; i > 0; i -= 3) whole.insert(i, ",");
  char frac[4];
  std::snprintf(frac, sizeof frac, "%02lld", cents % 100);
  return (amount < 0 && cents != 0 ? "-" : "") + whole + "." + frac;
}

std::string_view to_string(Regime regime) {
  return regime == Regime::kReal ? "real" : "synth";
}

Regime regime_from_string(std::string_view text) {
  if (text == "real") return Regime::kReal;
  if (text == "synth") return Regime::kSynth;
  throw ParseError("unknown regime '" + std::string(text) + "'");
}

void CostModel::validate() const {
  for (double c : {verifier_cost_per_trajectory, device_cost_per_minute, synth_verifier_cost,
                   synth_infra_cost})
    if (!(c >= 0.0)) throw ContractError("costs must be non-negative");
  for (double d : {rollout_hours_real, rollout_hours_synth, interaction_s_real,
                   interaction_s_synth})
    if (!(d > 0.0)) throw ContractError("durations must be positive");
}

CostReport epoch_cost(const CostModel& model, long long n_envs, long long rollouts_per_env,
                      Regime regime) {
  model.validate();
  if (n_envs < 1 || rollouts_per_env < 1)
    throw ContractError("n_envs and rollouts_per_env must be >= 1");
  const bool real = regime == Regime::kReal;
  CostReport r;
  r.regime = regime;
  r.n_envs = n_envs;
  r.rollouts_per_env = rollouts_per_env;
  r.trajectories = n_envs * rollouts_per_env;
  r.rollout_hours = real ? model.rollout_hours_real : model.rollout_hours_synth;
  const double per_minute = real ? model.device_cost_per_minute : model.synth_infra_cost;
  const double per_verify = real ? model.verifier_cost_per_trajectory : model.synth_verifier_cost;
  const double n = static_cast<double>(r.trajectories);
  r.device_cost = n * r.rollout_hours * 60.0 * per_minute;
  r.verifier_cost = n * per_verify;
  r.total = r.device_cost + r.verifier_cost;
  if (real) {
    r.reference = kReferenceEpochCost;
    r.residual = (r.total - r.reference) / r.reference;
  }
  return r;
}

double concurrent_device_cost(const CostModel& model, long long n_devices, double hours) {
  model.validate();
  if (n_devices < 1) throw ContractError("n_devices must be >= 1");
  if (!(hours > 0.0)) throw ContractError("hours must be positive");
  return static_cast<double>(n_devices) * hours * 60.0 * model.device_cost_per_minute;
}

AttemptHistogram attempt_histogram(std::span<const AttemptLog> logs) {
  AttemptHistogram h;
  h.jobs = logs.size();
  for (const auto& log : logs) {
    for (const auto& a : log.attempts)
      if (a.failure) ++h.failure_stages[std::string(to_string(*a.failure))];
    if (auto n = log.succeeded_at()) ++h.per_attempt_count[*n];
    else ++h.fail_count;
  }
  if (h.jobs == 0) return h;
  const double jobs = static_cast<double>(h.jobs);
  for (const auto& [n, count] : h.per_attempt_count) h.per_attempt_fraction[n] = count / jobs;
  h.fail_fraction = h.fail_count / jobs;
  return h;
}

std::vector<AlignmentRecord> read_alignment_csv(std::istream& in) {
  std::vector<AlignmentRecord> out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view t = trim_view(line);
    if (t.empty()) continue;
    if (!header) {
      if (t != "vlm_label,code_reward")
        throw ParseError("alignment CSV must start with header vlm_label,code_reward");
      header = true;
      continue;
    }
    const auto comma = t.find(',');
    if (comma == std::string_view::npos)
      throw ParseError("alignment line " + std::to_string(line_no) + ": expected two fields");
    try {
      std::size_t used = 0;
      const std::string label(trim_view(t.substr(0, comma)));
      const std::string reward(trim_view(t.substr(comma + 1)));
      AlignmentRecord r;
      r.vlm_label = std::stoi(label, &used);
      if (used != label.size()) throw std::invalid_argument("label");
      r.code_reward = std::stod(reward, &used);
      if (used != reward.size()) throw std::invalid_argument("reward");
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError("alignment line " + std::to_string(line_no) + ": bad number");
    }
  }
  if (!header) throw ParseError("alignment CSV is empty");
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary summarize(std::vector<double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.min = values.front();
  s.max = values.back();
  s.p25 = quantile_sorted(values, 0.25);
  s.p50 = quantile_sorted(values, 0.50);
  s.p75 = quantile_sorted(values, 0.75);
  s.p95 = quantile_sorted(values, 0.95);
  return s;
}

AlignmentReport reward_alignment(std::span<const AlignmentRecord> records) {
  AlignmentReport report;
  std::vector<double> rewards[2];
  for (const auto& r : records) {
    if (r.vlm_label != 0 && r.vlm_label != 1)
      throw ContractError("vlm_label must be 0 or 1");
    if (!(r.code_reward >= 0.0 && r.code_reward <= 1.0))
      throw ContractError("code_reward must lie in [0, 1]");
    rewards[r.vlm_label].push_back(r.code_reward);
  }
  for (int label = 0; label < 2; ++label) {
    ClassAlignment& c = label == 0 ? report.failure : report.success;
    const auto& v = rewards[label];
    c.count = v.size();
    c.rewards = summarize(v);
    if (v.empty()) continue;
    std::size_t le = 0, gt = 0;
    for (double r : v) {
      if (r <= 0.6) ++le;
      if (r > 0.8) ++gt;
      const auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(std::floor(r * 10.0 + 1e-9)));
      ++c.histogram[bin];
    }
    c.frac_le_0_6 = static_cast<double>(le) / v.size();
    c.frac_gt_0_8 = static_cast<double>(gt) / v.size();
  }
  return report;
}

LengthReport length_distribution(std::span<const std::size_t> lengths, std::size_t clip) {
  if (clip < 1) throw ContractError("clip must be >= 1");
  LengthReport r;
  r.clip = clip;
  r.total = lengths.size();
  double sum = 0.0;
  for (std::size_t n : lengths) {
    if (n > clip) {
      ++r.removed;
      continue;
    }
    ++r.kept;
    sum += static_cast<double>(n);
    ++r.histogram[n];
  }
  if (r.kept) r.mean = sum / static_cast<double>(r.kept);
  return r;
}

LengthReport length_distribution(std::span<const Trajectory> trajectories, std::size_t clip) {
  std::vector<std::size_t> lengths;
  for (const auto& t : trajectories) lengths.push_back(t.step_count);
  return length_distribution(lengths, clip);
}

LatencyReport latency_stats(std::span<const Trajectory> trajectories) {
  LatencyReport r;
  std::vector<double> per_step, per_rollout;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& t = trajectories[i];
    if (t.step_count == 0) {
      ++r.excluded;
      r.warnings.push_back("trajectory " + std::to_string(i) + " (" + t.task_id +
                           ") has no steps; excluded");
      continue;
    }
    per_step.push_back(t.wall_clock_s / static_cast<double>(t.step_count));
    per_rollout.push_back(t.wall_clock_s / 3600.0);
  }
  r.per_interaction_s = summarize(std::move(per_step));
  r.per_rollout_h = summarize(std::move(per_rollout));
  return r;
}

namespace {

double cents(double v) { return std::round(v * 100.0) / 100.0; }

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Two-column table, keys left-aligned to the widest key.
class Table {
 public:
  Table& row(std::string key, std::string value) {
    rows_.emplace_back(std::move(key), std::move(value));
    return *this;
  }
  std::string str() const {
    std::size_t w = 0;
    for (const auto& [k, _] : rows_) w = std::max(w, k.size());
    std::string out;
    for (const auto& [k, v] : rows_) out += k + std::string(w - k.size() + 2, ' ') + v + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

void summary_rows(Table& t, const std::string& prefix, const Summary& s, int digits) {
  t.row(prefix + " count", std::to_string(s.count));
  if (!s.count) return;
  t.row(prefix + " mean", num(s.mean, digits))
      .row(prefix + " p50", num(s.p50, digits))
      .row(prefix + " p95", num(s.p95, digits));
}

json class_json(const ClassAlignment& c) {
  return {{"label", c.label},
          {"count", c.count},
          {"quartiles", {{"q1", c.rewards.p25}, {"median", c.rewards.p50}, {"q3", c.rewards.p75}}},
          {"frac_le_0_6", c.frac_le_0_6},
          {"frac_gt_0_8", c.frac_gt_0_8},
          {"histogram", c.histogram}};
}

}  // namespace

json to_json(const CostReport& r) {
  json j{{"kind", "cost"},
         {"regime", to_string(r.regime)},
         {"n_envs", r.n_envs},
         {"rollouts_per_env", r.rollouts_per_env},
         {"trajectories", r.trajectories},
         {"rollout_hours", r.rollout_hours},
         {"device_cost", cents(r.device_cost)},
         {"verifier_cost", cents(r.verifier_cost)},
         {"total", cents(r.total)},
         {"total_display", format_currency(r.total)}};
  if (r.regime == Regime::kReal) {
    j["reference_total"] = r.reference;
    j["residual_fraction"] = r.residual;
  }
  return j;
}

json to_json(const AttemptHistogram& h) {
  json per = json::object(), counts = json::object();
  for (const auto& [n, f] : h.per_attempt_fraction) per[std::to_string(n)] = f;
  for (const auto& [n, c] : h.per_attempt_count) counts[std::to_string(n)] = c;
  return {{"kind", "attempts"},         {"jobs", h.jobs},
          {"per_attempt_fraction", per}, {"per_attempt_count", counts},
          {"fail_count", h.fail_count},  {"fail_fraction", h.fail_fraction},
          {"failure_stages", h.failure_stages}};
}

json to_json(const Summary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"min", s.min}, {"p25", s.p25},
          {"p50", s.p50},     {"p75", s.p75},   {"p95", s.p95}, {"max", s.max}};
}

json to_json(const AlignmentReport& r) {
  return {{"kind", "alignment"}, {"classes", json::array({class_json(r.failure), class_json(r.success)})}};
}

json to_json(const LengthReport& r) {
  json hist = json::object();
  for (const auto& [n, c] : r.histogram) hist[std::to_string(n)] = c;
  return {{"kind", "lengths"}, {"clip", r.clip}, {"total", r.total},
          {"kept", r.kept},    {"removed", r.removed}, {"mean", r.mean},
          {"histogram", hist}};
}

json to_json(const LatencyReport& r) {
  return {{"kind", "latency"},
          {"per_interaction_s", to_json(r.per_interaction_s)},
          {"per_rollout_h", to_json(r.per_rollout_h)},
          {"excluded", r.excluded},
          {"warnings", r.warnings}};
}

std::string render_table(const CostReport& r) {
  Table t;
  t.row("regime", std::string(to_string(r.regime)))
      .row("trajectories", std::to_string(r.trajectories) + " (" + std::to_string(r.n_envs) +
                               " envs x " + std::to_string(r.rollouts_per_env) + ")")
      .row("rollout hours", num(r.rollout_hours))
      .row("device cost", "$" + format_currency(r.device_cost))
      .row("verifier cost", "$" + format_currency(r.verifier_cost))
      .row("total", "$" + format_currency(r.total));
  if (r.regime == Regime::kReal) {
    char pct[32];
    std::snprintf(pct, sizeof pct, "%+.2f%%", r.residual * 100.0);
    t.row("reference", ">$" + format_currency(r.reference))
        .row("residual", "$" + format_currency(r.total - r.reference) + " (" + pct + ")");
  }
  return t.str();
}

std::string render_table(const AttemptHistogram& h) {
  Table t;
  t.row("jobs", std::to_string(h.jobs));
  for (const auto& [n, f] : h.per_attempt_fraction)
    t.row("attempt " + std::to_string(n),
          num(f * 100.0, 2) + "% (" + std::to_string(h.per_attempt_count.at(n)) + ")");
  t.row("failed", num(h.fail_fraction * 100.0, 2) + "% (" + std::to_string(h.fail_count) + ")");
  for (const auto& [stage, c] : h.failure_stages) t.row("rejected at " + stage, std::to_string(c));
  return t.str();
}

std::string render_table(const AlignmentReport& r) {
  std::ostringstream out;
  out << "label  count  q1      median  q3      <=0.6   >0.8\n";
  for (const ClassAlignment* c : {&r.failure, &r.success}) {
    char line[128];
    std::snprintf(line, sizeof line, "%-5d  %-5zu  %-6.4f  %-6.4f  %-6.4f  %-6.4f  %-6.4f\n",
                  c->label, c->count, c->rewards.p25, c->rewards.p50, c->rewards.p75,
                  c->frac_le_0_6, c->frac_gt_0_8);
    out << line;
  }
  out << "histogram (bin width 0.1)\n";
  for (const ClassAlignment* c : {&r.failure, &r.success}) {
    out << "label " << c->label << ":";
    for (std::size_t n : c->histogram) out << ' ' << n;
    out << '\n';
  }
  return out.str();
}

std::string render_table(const LengthReport& r) {
  Table t;
  t.row("clip", std::to_string(r.clip))
      .row("kept", std::to_string(r.kept) + " of " + std::to_string(r.total))
      .row("removed", std::to_string(r.removed))
      .row("mean", num(r.mean));
  for (const auto& [n, c] : r.histogram) t.row("len " + std::to_string(n), std::to_string(c));
  return t.str();
}

std::string render_table(const LatencyReport& r) {
  Table t;
  summary_rows(t, "per interaction (s)", r.per_interaction_s, 4);
  summary_rows(t, "per rollout (h)", r.per_rollout_h, 6);
  if (r.excluded) t.row("excluded", std::to_string(r.excluded));
  return t.str();
}

}  // namespace envforge
