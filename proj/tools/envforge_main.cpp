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

// envforge: synthesize, verify and train against task-conditioned web
// environments.
//
// Exit status: 0 success, 1 operation failure, 2 usage or configuration
// error.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "envforge/analytics.hpp"
#include "envforge/bundle.hpp"
#include "envforge/envpool.hpp"
#include "envforge/error.hpp"
#include "envforge/live_provider.hpp"
#include "envforge/mock_provider.hpp"
#include "envforge/rollout.hpp"
#include "envforge/synthesis.hpp"
#include "envforge/trace.hpp"
#include "envforge/training.hpp"
#include "envforge/util.hpp"
#include "envforge/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace envforge;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

// Raised for bad inputs that should map to exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 7;
  std::string format = "table";
};

struct PoolFlags {
  std::size_t max_live = 8;
  int port_lo = 20000;
  int port_hi = 20999;
  double spawn_timeout_s = 10.0;
  std::string parse_mode = "lenient";

  PoolConfig config() const {
    PoolConfig c;
    c.max_live = max_live;
    c.port_lo = static_cast<std::uint16_t>(port_lo);
    c.port_hi = static_cast<std::uint16_t>(port_hi);
    c.spawn_timeout = std::chrono::milliseconds(static_cast<long long>(spawn_timeout_s * 1000));
    c.parse_mode = parse_mode_from_string(parse_mode);
    c.validate();
    return c;
  }
};

void add_pool_flags(CLI::App* cmd, PoolFlags& f) {
  cmd->add_option("--max-live", f.max_live, "Live environment processes")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--port-lo", f.port_lo, "Lowest port handed to environments")
      ->check(CLI::Range(1024, 65535));
  cmd->add_option("--port-hi", f.port_hi, "Highest port handed to environments")
      ->check(CLI::Range(1024, 65535));
  cmd->add_option("--spawn-timeout", f.spawn_timeout_s, "Seconds to wait for health")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--parse-mode", f.parse_mode, "Reward line parsing")
      ->check(CLI::IsMember({"strict", "lenient"}));
}

struct ProviderFlags {
  std::string kind = "mock";
  double success_probability = 1.0;
  std::string mock_script;
  std::string reflection_answer;
};

void add_provider_flags(CLI::App* cmd, ProviderFlags& f) {
  cmd->add_option("--provider", f.kind, "Code-model backend")
      ->check(CLI::IsMember({"mock", "live"}));
  cmd->add_option("--mock-success", f.success_probability,
                  "Mock: chance that an attempt comes out clean")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--mock-script", f.mock_script,
                  "Mock: JSON {task_id: [failure_stage|null, ...]}")
      ->check(CLI::ExistingFile);
  cmd->add_option("--mock-reflection", f.reflection_answer,
                  "Mock: fixed answer to self-review requests");
}

std::unique_ptr<Provider> make_provider(const ProviderFlags& f, std::uint64_t seed) {
  if (f.kind == "live") {
    try {
      return std::make_unique<LiveProvider>(LiveProviderConfig::from_env());
    } catch (const ContractError& e) {
      throw UsageError(std::string("live provider: ") + e.what());
    }
  }
  MockProviderOptions opts;
  opts.seed = seed;
  opts.success_probability = f.success_probability;
  if (!f.reflection_answer.empty()) opts.reflection_answer = f.reflection_answer;
  if (!f.mock_script.empty()) {
    try {
      const json j = json::parse(read_file(f.mock_script));
      for (const auto& [task, list] : j.items()) {
        std::vector<std::optional<FailureStage>> script;
        for (const auto& s : list)
          script.push_back(s.is_null() ? std::nullopt
                                       : std::optional(failure_stage_from_string(s.get<std::string>())));
        opts.scripts[task] = std::move(script);
      }
    } catch (const std::exception& e) {
      throw UsageError(std::string("mock script: ") + e.what());
    }
  }
  return std::make_unique<MockProvider>(opts);
}

void emit(const Globals& g, const json& doc, const std::string& table) {
  if (g.format == "json") std::cout << doc.dump(2) << "\n";
  else std::cout << table;
}

template <typename T>
T read_with(const std::string& path, T (*reader)(std::istream&)) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  return reader(in);
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
  std::string tasks;
  std::string traces;
  std::string out = "bundles";
  int max_attempts = 5;
  int jobs = 1;
  int viewport_w = 410;
  int viewport_h = 858;
  bool no_distractors = false;
  int min_distractors = 3;
  int max_distractors = 5;
  ProviderFlags provider;
  PoolFlags pool;
};

std::vector<TaskSpec> read_tasks_file(const std::string& path) {
  return read_with<std::vector<TaskSpec>>(path, &read_tasks);
}

int cmd_synth(const Globals& g, const SynthFlags& f) {
  auto provider = make_provider(f.provider, g.seed);
  const auto tasks = read_tasks_file(f.tasks);
  std::ifstream trace_in(f.traces);
  if (!trace_in) throw UsageError("cannot read " + f.traces);
  IngestResult ingest = ingest_traces(trace_in);
  for (const auto& issue : ingest.report.errors)
    std::cerr << "warning: traces line " << issue.line_no << ": " << issue.message << "\n";

  SynthConfig cfg;
  cfg.max_attempts = f.max_attempts;
  cfg.constraints.viewport_w = f.viewport_w;
  cfg.constraints.viewport_h = f.viewport_h;
  cfg.constraints.require_distractors = !f.no_distractors;
  cfg.constraints.min_distractors = f.min_distractors;
  cfg.constraints.max_distractors = f.max_distractors;
  try {
    cfg.constraints.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }

  EnvPool pool(f.pool.config());
  struct Outcome {
    std::optional<SynthesisResult> result;
    std::string error;
  };
  std::vector<Outcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> provider_down{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const TaskSpec& task = tasks[i];
      const Trace* trace = ingest.traces.find(task.id);
      if (!trace) {
        outcomes[i].error = "no trace for task";
        continue;
      }
      try {
        outcomes[i].result = synthesize_environment(task, *trace, *provider, cfg, pool);
      } catch (const ProviderUnavailable& e) {
        outcomes[i].error = e.what();
        provider_down = true;
      } catch (const Error& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 1; t < f.jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  pool.shutdown();

  fs::create_directories(f.out);
  json rows = json::array();
  std::string table = "task_id  attempt  verified  failure_stage\n";
  std::string log_lines;
  std::size_t produced = 0, verified = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Outcome& o = outcomes[i];
    json row{{"task_id", tasks[i].id}};
    if (!o.result) {
      row["error"] = o.error;
      std::cerr << "error: " << tasks[i].id << ": " << o.error << "\n";
      rows.push_back(row);
      table += tasks[i].id + "  -  -  error: " + o.error + "\n";
      continue;
    }
    const EnvBundle& b = o.result->bundle;
    const fs::path dir = bundle_dir(f.out, b.task_id, b.attempt);
    write_bundle(dir, b);
    log_lines += to_json(o.result->log).dump() + "\n";
    ++produced;
    if (b.verified) ++verified;
    else std::cerr << "warning: " << b.task_id << " kept unverified after " << b.attempt << " attempts\n";
    const std::string stage = b.failure_stage ? std::string(to_string(*b.failure_stage)) : "none";
    row["attempt"] = b.attempt;
    row["verified"] = b.verified;
    row["failure_stage"] = b.failure_stage ? json(stage) : json();
    row["path"] = dir.string();
    rows.push_back(row);
    table += b.task_id + "  " + std::to_string(b.attempt) + "  " + (b.verified ? "yes" : "no") +
             "  " + stage + "\n";
  }
  write_file_atomic(fs::path(f.out) / "attempt_log.jsonl", log_lines);
  emit(g,
       {{"command", "synth"}, {"bundles_dir", f.out}, {"produced", produced},
        {"verified", verified}, {"tasks", rows}},
       table);
  if (provider_down && produced == 0) return kFailed;
  return produced > 0 ? kOk : kFailed;
}

// --------------------------------------------------------------- verify

struct VerifyFlags {
  std::string bundle;
  ProviderFlags provider;
  PoolFlags pool;
};

EnvBundle load_or_usage(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("no bundle at " + path);
  try {
    return load_bundle(path);
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  }
}

int cmd_verify(const Globals& g, const VerifyFlags& f) {
  EnvBundle bundle = load_or_usage(f.bundle);
  if (bundle.golden_path.steps.empty()) throw UsageError("bundle has no golden path");
  auto provider = make_provider(f.provider, g.seed);
  EnvPool pool(f.pool.config());
  const VerificationReport report = verify_bundle(bundle, *provider, pool);
  pool.shutdown();

  json doc = to_json(report);
  doc["command"] = "verify";
  doc["task_id"] = bundle.task_id;
  std::string table = "task_id         " + bundle.task_id + "\n";
  table += std::string("static_passed   ") + (report.static_passed ? "yes" : "no") + "\n";
  table += std::string("dynamic_passed  ") + (report.dynamic_passed ? "yes" : "no") + "\n";
  table += "failure_stage   " + std::string(to_string(report.failure_stage)) + "\n";
  for (const auto& m : report.milestones) {
    char line[128];
    std::snprintf(line, sizeof line, "step %-3zu expected %.4f observed %.4f %s\n", m.step_index,
                  m.expected, m.observed, m.met ? "met" : "MISSED");
    table += line;
  }
  if (!report.detail.empty()) table += "detail          " + report.detail + "\n";
  emit(g, doc, table);
  return report.dynamic_passed ? kOk : kFailed;
}

// -------------------------------------------------------------- rollout

struct RolloutFlags {
  std::string bundle;
  std::string policy = "golden";
  std::size_t episodes = 1;
  std::size_t max_steps = 20;
  std::string out = "trajectories.jsonl";
  std::string params;
  PoolFlags pool;
};

std::vector<double> params_for(const std::string& path, const std::string& task_id,
                               const std::vector<EnvAction>& catalog) {
  std::vector<double> theta(catalog.size(), 0.0);
  if (path.empty()) return theta;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw UsageError(std::string("params: ") + e.what());
  }
  const json entries = j.value("parameters", json::object()).value(task_id, json::array());
  std::map<std::string, double> by_action;
  for (const auto& e : entries) by_action[e.at("action").get<std::string>()] = e.at("logit").get<double>();
  for (std::size_t k = 0; k < catalog.size(); ++k)
    if (auto it = by_action.find(catalog[k].describe()); it != by_action.end()) theta[k] = it->second;
  return theta;
}

int cmd_rollout(const Globals& g, const RolloutFlags& f) {
  const EnvBundle bundle = load_or_usage(f.bundle);
  EnvPool pool(f.pool.config());
  RolloutOptions opts;
  opts.max_steps = f.max_steps;

  std::unique_ptr<Policy> policy;
  SoftmaxPolicy* toy = nullptr;
  if (f.policy == "golden") {
    if (bundle.golden_path.steps.empty()) throw UsageError("bundle has no golden path");
    policy = std::make_unique<ScriptedPolicy>(ScriptedPolicy::from_golden_path(bundle.golden_path));
  } else {
    std::vector<EnvAction> catalog;
    try {
      catalog = policy_catalog(pool, bundle);
    } catch (const SpawnError& e) {
      std::cerr << "error: " << e.what() << "\n" << e.captured_output();
      return kFailed;
    }
    if (f.policy == "random") {
      policy = std::make_unique<RandomPolicy>(catalog, g.seed);
    } else {
      auto p = std::make_unique<SoftmaxPolicy>(catalog, g.seed);
      p->theta() = params_for(f.params, bundle.task_id, catalog);
      toy = p.get();
      policy = std::move(p);
    }
  }

  std::string lines;
  std::vector<Trajectory> trajectories;
  try {
    for (std::size_t e = 0; e < f.episodes; ++e) {
      if (toy) toy->reseed(mix_seed(g.seed, e));
      trajectories.push_back(run_bundle_episode(pool, bundle, *policy, opts));
      lines += to_json(trajectories.back()).dump() + "\n";
    }
  } catch (const SpawnError& e) {
    std::cerr << "error: " << e.what() << "\n" << e.captured_output();
    return kFailed;
  }
  pool.shutdown();
  write_file_atomic(f.out, lines);

  std::size_t successes = 0, max_len = 0;
  double reward_sum = 0.0;
  for (const auto& t : trajectories) {
    successes += t.success;
    reward_sum += t.final_reward;
    max_len = std::max(max_len, t.step_count);
  }
  const double n = static_cast<double>(trajectories.size());
  json doc{{"command", "rollout"},        {"task_id", bundle.task_id},
           {"policy", f.policy},          {"episodes", trajectories.size()},
           {"success_rate", successes / n}, {"mean_final_reward", reward_sum / n},
           {"max_step_count", max_len},   {"output", f.out}};
  char table[256];
  std::snprintf(table, sizeof table,
                "task_id       %s\npolicy        %s\nepisodes      %zu\nsuccess_rate  %.4f\n"
                "mean_reward   %.4f\nmax_steps     %zu\noutput        %s\n",
                bundle.task_id.c_str(), f.policy.c_str(), trajectories.size(), successes / n,
                reward_sum / n, max_len, f.out.c_str());
  emit(g, doc, table);
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainFlags {
  std::string bundles = "bundles";
  std::size_t iterations = 30;
  std::size_t group_size = 8;
  double learning_rate = 0.5;
  std::size_t max_steps = 20;
  std::size_t eval_episodes = 0;
  bool allow_unverified = false;
  std::string out = "training_report.json";
  PoolFlags pool;
};

int cmd_train(const Globals& g, const TrainFlags& f) {
  std::vector<EnvBundle> bundles;
  for (const auto& dir : list_bundles(f.bundles)) {
    try {
      EnvBundle b = load_bundle(dir);
      if (b.verified || f.allow_unverified) bundles.push_back(std::move(b));
    } catch (const ParseError& e) {
      std::cerr << "warning: skipping " << dir.string() << ": " << e.what() << "\n";
    }
  }
  if (bundles.empty())
    throw UsageError("no " + std::string(f.allow_unverified ? "" : "verified ") + "bundles under " +
                     f.bundles);

  TrainConfig cfg;
  cfg.group_size = f.group_size;
  cfg.iterations = f.iterations;
  cfg.learning_rate = f.learning_rate;
  cfg.max_steps = f.max_steps;
  cfg.seed = g.seed;
  cfg.eval_episodes = f.eval_episodes;
  cfg.allow_unverified = f.allow_unverified;

  EnvPool pool(f.pool.config());
  TrainingReport report;
  try {
    report = train_toy_policy(pool, bundles, cfg);
  } catch (const SpawnError& e) {
    std::cerr << "error: " << e.what() << "\n" << e.captured_output();
    return kFailed;
  }
  pool.shutdown();
  json doc = to_json(report);
  write_file_atomic(f.out, doc.dump(2) + "\n");

  std::string table = "iteration  mean_success  mean_reward\n";
  for (const auto& m : report.iterations) {
    char line[96];
    std::snprintf(line, sizeof line, "%-9zu  %-12.4f  %.4f\n", m.iteration, m.mean_success,
                  m.mean_reward);
    table += line;
  }
  char tail[160];
  std::snprintf(tail, sizeof tail, "final eval %.4f (initial %.4f)\nreport     %s\n",
                report.final_success(), report.initial_success(), f.out.c_str());
  table += tail;
  json summary{{"command", "train"},
               {"initial_success", report.initial_success()},
               {"final_success", report.final_success()},
               {"iterations", report.iterations.size()},
               {"output", f.out}};
  emit(g, summary, table);
  return kOk;
}

// --------------------------------------------------------------- report

struct ReportFlags {
  std::string kind;
  std::string input;
  long long n_envs = 1000;
  long long rollouts = 12;
  std::string regime = "real";
  long long devices = 100;
  double hours = 24.0;
  std::size_t clip = 20;
  CostModel model;
};

std::vector<Trajectory> read_trajectory_file(const std::string& path) {
  return read_with<std::vector<Trajectory>>(path, &read_trajectories);
}

std::vector<AttemptLog> read_attempt_logs(std::istream& in) {
  std::vector<AttemptLog> logs;
  std::string line;
  while (std::getline(in, line))
    if (!trim_view(line).empty()) logs.push_back(attempt_log_from_json(json::parse(line)));
  return logs;
}

// Trajectory dumps, or one integer length per line.
std::vector<std::size_t> read_lengths(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<std::size_t> lengths;
  while (std::getline(in, line)) {
    const std::string_view t = trim_view(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.front() == '{') {
      std::istringstream all(text);
      for (const auto& tr : read_trajectories(all)) lengths.push_back(tr.step_count);
      return lengths;
    }
    try {
      lengths.push_back(std::stoull(std::string(t)));
    } catch (const std::exception&) {
      throw ParseError("lengths file: not an integer: " + std::string(t));
    }
  }
  return lengths;
}

int cmd_report(const Globals& g, const ReportFlags& f) {
  auto need_input = [&] {
    if (f.input.empty()) throw UsageError("--input is required for --kind " + f.kind);
    if (!fs::exists(f.input)) throw UsageError("cannot read " + f.input);
  };
  if (f.kind == "cost") {
    const CostReport r = epoch_cost(f.model, f.n_envs, f.rollouts, regime_from_string(f.regime));
    const double daily = concurrent_device_cost(f.model, f.devices, f.hours);
    json doc = to_json(r);
    doc["command"] = "report";
    doc["concurrent_devices"] = {{"devices", f.devices},
                                 {"hours", f.hours},
                                 {"cost", std::round(daily * 100.0) / 100.0},
                                 {"reference", kReferenceDailyCost},
                                 {"residual_fraction", (daily - kReferenceDailyCost) / kReferenceDailyCost}};
    char extra[160];
    std::snprintf(extra, sizeof extra, "devices       %lld x %.2f h = $%s (reference ~$%s, %+.2f%%)\n",
                  f.devices, f.hours, format_currency(daily).c_str(),
                  format_currency(kReferenceDailyCost).c_str(),
                  (daily - kReferenceDailyCost) / kReferenceDailyCost * 100.0);
    emit(g, doc, render_table(r) + extra);
    return kOk;
  }
  need_input();
  json doc;
  std::string table;
  if (f.kind == "attempts") {
    const auto logs = read_with<std::vector<AttemptLog>>(f.input, &read_attempt_logs);
    const AttemptHistogram h = attempt_histogram(logs);
    doc = to_json(h);
    table = render_table(h);
  } else if (f.kind == "alignment") {
    const auto records = read_with<std::vector<AlignmentRecord>>(f.input, &read_alignment_csv);
    const AlignmentReport r = reward_alignment(records);
    doc = to_json(r);
    table = render_table(r);
  } else if (f.kind == "lengths") {
    const LengthReport r = length_distribution(read_lengths(f.input), f.clip);
    doc = to_json(r);
    table = render_table(r);
  } else {
    const LatencyReport r = latency_stats(read_trajectory_file(f.input));
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    doc = to_json(r);
    table = render_table(r);
  }
  doc["command"] = "report";
  emit(g, doc, table);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesize, verify and train against task-conditioned web environments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Key-value config file (TOML or INI); flags override it");
  app.set_version_flag("--version", "envforge 0.1.0");

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every stochastic component");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "table"}));

  SynthFlags synth;
  auto* s = app.add_subcommand("synth", "Synthesize one environment per task");
  s->add_option("--tasks", synth.tasks, "Task file, one JSON task per line")
      ->required()->check(CLI::ExistingFile);
  s->add_option("--traces", synth.traces, "Trace file, one JSON trace per line")
      ->required()->check(CLI::ExistingFile);
  s->add_option("--out", synth.out, "Bundles directory");
  s->add_option("--max-attempts", synth.max_attempts, "Attempts per task (K)")
      ->check(CLI::PositiveNumber);
  s->add_option("--jobs", synth.jobs, "Concurrent synthesis jobs")->check(CLI::PositiveNumber);
  s->add_option("--viewport-w", synth.viewport_w, "Viewport width")->check(CLI::PositiveNumber);
  s->add_option("--viewport-h", synth.viewport_h, "Viewport height")->check(CLI::PositiveNumber);
  s->add_flag("--no-distractors", synth.no_distractors, "Do not require distractor options");
  s->add_option("--min-distractors", synth.min_distractors, "Fewest distractors per choice");
  s->add_option("--max-distractors", synth.max_distractors, "Most distractors per choice");
  add_provider_flags(s, synth.provider);
  add_pool_flags(s, synth.pool);

  VerifyFlags verify;
  auto* v = app.add_subcommand("verify", "Run self-review and the golden path on a bundle");
  v->add_option("bundle", verify.bundle, "Bundle directory")->required();
  add_provider_flags(v, verify.provider);
  add_pool_flags(v, verify.pool);

  RolloutFlags rollout;
  auto* r = app.add_subcommand("rollout", "Record episodes of a policy on a bundle");
  r->add_option("bundle", rollout.bundle, "Bundle directory")->required();
  r->add_option("--policy", rollout.policy, "Policy")
      ->check(CLI::IsMember({"golden", "random", "toy"}));
  r->add_option("--episodes", rollout.episodes, "Episodes to run")->check(CLI::PositiveNumber);
  r->add_option("--max-steps", rollout.max_steps, "Step cap per episode")
      ->check(CLI::PositiveNumber);
  r->add_option("--out", rollout.out, "Trajectory dump (JSON lines)");
  r->add_option("--params", rollout.params, "Training report whose logits the toy policy uses")
      ->check(CLI::ExistingFile);
  add_pool_flags(r, rollout.pool);

  TrainFlags train;
  auto* t = app.add_subcommand("train", "Group-relative training of the toy policy");
  t->add_option("--bundles", train.bundles, "Bundles directory");
  t->add_option("--iterations", train.iterations, "Training iterations")
      ->check(CLI::NonNegativeNumber);
  t->add_option("--group-size", train.group_size, "Episodes per group (G)")
      ->check(CLI::Range(2, 1 << 20));
  t->add_option("--learning-rate", train.learning_rate, "Step size")
      ->check(CLI::NonNegativeNumber);
  t->add_option("--max-steps", train.max_steps, "Step cap per episode")
      ->check(CLI::PositiveNumber);
  t->add_option("--eval-episodes", train.eval_episodes, "Closing evaluation episodes per env");
  t->add_flag("--allow-unverified", train.allow_unverified, "Train on unverified bundles too");
  t->add_option("--out", train.out, "Training report path");
  add_pool_flags(t, train.pool);

  ReportFlags report;
  auto* p = app.add_subcommand("report", "Cost, attempt, alignment, length and latency reports");
  p->add_option("--kind", report.kind, "Report kind")
      ->required()
      ->check(CLI::IsMember({"cost", "attempts", "alignment", "lengths", "latency"}));
  p->add_option("--input", report.input, "Input file for the report kind");
  p->add_option("--n-envs", report.n_envs, "Environments per epoch")->check(CLI::PositiveNumber);
  p->add_option("--rollouts", report.rollouts, "Rollouts per environment")
      ->check(CLI::PositiveNumber);
  p->add_option("--regime", report.regime, "Cost regime")->check(CLI::IsMember({"real", "synth"}));
  p->add_option("--devices", report.devices, "Concurrent devices")->check(CLI::PositiveNumber);
  p->add_option("--hours", report.hours, "Device hours")->check(CLI::PositiveNumber);
  p->add_option("--clip", report.clip, "Length clip")->check(CLI::PositiveNumber);
  p->add_option("--device-cost-per-minute", report.model.device_cost_per_minute)
      ->check(CLI::NonNegativeNumber);
  p->add_option("--verifier-cost", report.model.verifier_cost_per_trajectory)
      ->check(CLI::NonNegativeNumber);
  p->add_option("--rollout-hours-real", report.model.rollout_hours_real)
      ->check(CLI::PositiveNumber);
  p->add_option("--rollout-hours-synth", report.model.rollout_hours_synth)
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(g, synth);
    if (v->parsed()) return cmd_verify(g, verify);
    if (r->parsed()) return cmd_rollout(g, rollout);
    if (t->parsed()) return cmd_train(g, train);
    if (p->parsed()) return cmd_report(g, report);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
