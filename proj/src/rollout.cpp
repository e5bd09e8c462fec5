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

#include "envforge/rollout.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <regex>
#include <set>

#include "envforge/error.hpp"
#include "envforge/http.hpp"
#include "envforge/util.hpp"

namespace envforge {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

RewardStream Trajectory::events() const {
  RewardStream all;
  for (const auto& s : steps) all.append(s.events);
  return all;
}

json to_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    json events = json::array();
    for (const auto& e : s.events.events) events.push_back(to_json(e));
    json step{{"action", to_json(s.action)},
              {"status", s.observation.status},
              {"reward_events", events}};
    if (s.error) step["error"] = *s.error;
    steps.push_back(std::move(step));
  }
  return {{"task_id", t.task_id},       {"steps", steps},
          {"final_reward", t.final_reward}, {"success", t.success},
          {"wall_clock_s", t.wall_clock_s}, {"step_count", t.step_count}};
}

Trajectory trajectory_from_json(const json& j) {
  try {
    Trajectory t;
    t.task_id = j.at("task_id").get<std::string>();
    for (const auto& s : j.at("steps")) {
      TrajectoryStep step;
      step.action = env_action_from_json(s.at("action"));
      step.observation.status = s.value("status", 0);
      step.observation.status_class = status_class(step.observation.status);
      for (const auto& e : s.value("reward_events", json::array())) {
        RewardEvent ev;
        ev.seq = e.value("seq", std::uint64_t{0});
        ev.reward = e.at("reward").get<double>();
        ev.next_hint = e.value("next", std::string());
        if (e.contains("explanation") && !e["explanation"].is_null())
          ev.explanation = e["explanation"].get<std::string>();
        step.events.events.push_back(std::move(ev));
      }
      if (s.contains("error")) step.error = s["error"].get<std::string>();
      t.steps.push_back(std::move(step));
    }
    t.final_reward = j.at("final_reward").get<double>();
    t.success = j.at("success").get<bool>();
    t.wall_clock_s = j.at("wall_clock_s").get<double>();
    t.step_count = j.value("step_count", t.steps.size());
    return t;
  } catch (const json::exception& e) {
    throw ParseError(std::string("trajectory record: ") + e.what());
  }
}

std::vector<Trajectory> read_trajectories(std::istream& in) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(trajectory_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError("trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ScriptedPolicy ScriptedPolicy::from_golden_path(const GoldenPathScript& golden) {
  std::vector<EnvAction> script;
  for (const auto& s : golden.steps) script.push_back(s.action);
  return ScriptedPolicy(std::move(script));
}

EnvAction ScriptedPolicy::next(const EpisodeView&) {
  if (pos_ >= script_.size()) return EnvAction::stop();
  return script_[pos_++];
}

RandomPolicy::RandomPolicy(std::vector<EnvAction> catalog, std::uint64_t seed)
    : catalog_(std::move(catalog)), rng_(seed) {
  if (catalog_.empty()) throw ContractError("random policy needs a non-empty catalog");
}

EnvAction RandomPolicy::next(const EpisodeView&) {
  return catalog_[rng_() % catalog_.size()];
}

Trajectory run_episode(EnvPool& pool, const EnvHandle& handle, Policy& policy,
                       const RolloutOptions& options, const std::string& task_id) {
  if (options.max_steps < 1) throw ContractError("max_steps must be >= 1");
  Trajectory traj;
  traj.task_id = task_id;
  Session session(options.excerpt_cap, options.action_timeout);
  policy.begin_episode();

  const auto start = Clock::now();
  double current = 0.0;
  bool terminal = false;
  while (traj.steps.size() < options.max_steps && !terminal) {
    EnvAction action = policy.next(EpisodeView{traj.steps, current});
    if (action.kind == EnvActionKind::kStop) break;

    TrajectoryStep step;
    step.action = action;
    try {
      StepResult r = session.step(pool, handle, action);
      step.observation = std::move(r.observation);
      step.events = std::move(r.events);
    } catch (const TransportError& e) {
      step.error = e.what();
      step.observation.status_class = "none";
    }
    for (const auto& ev : step.events.events)
      if (classify_success(ev.reward)) terminal = true;
    if (!step.events.events.empty()) current = step.events.events.back().reward;
    const bool failed = step.error.has_value();
    traj.steps.push_back(std::move(step));
    if (failed) break;
  }
  traj.wall_clock_s = std::chrono::duration<double>(Clock::now() - start).count();
  traj.step_count = traj.steps.size();
  traj.final_reward = final_reward(traj.events());
  traj.success = classify_success(traj.final_reward);
  return traj;
}

Trajectory run_bundle_episode(EnvPool& pool, const EnvBundle& bundle, Policy& policy,
                              const RolloutOptions& options) {
  EnvHandle handle = pool.lease(bundle);
  Trajectory traj;
  try {
    traj = run_episode(pool, handle, policy, options, bundle.task_id);
  } catch (...) {
    pool.release(handle);
    throw;
  }
  pool.release(handle);
  return traj;
}

std::vector<double> grpo_advantages(std::span<const double> rewards) {
  const std::size_t g = rewards.size();
  if (g < 2) throw ContractError("group size must be at least 2");
  std::vector<double> adv(g, 0.0);
  bool identical = true;
  for (double r : rewards) identical = identical && r == rewards.front();
  if (identical) return adv;

  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / g;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / g);
  if (sd == 0.0) return adv;
  for (std::size_t i = 0; i < g; ++i)
    adv[i] = (rewards[i] - mean) / (sd + kAdvantageEpsilon);
  return adv;
}

namespace {

std::string html_unescape(std::string s) {
  static const std::pair<const char*, const char*> kEntities[] = {
      {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}};
  for (const auto& [from, to] : kEntities) {
    std::size_t pos = 0;
    const std::string f(from);
    while ((pos = s.find(f, pos)) != std::string::npos) {
      s.replace(pos, f.size(), to);
      pos += std::string(to).size();
    }
  }
  return s;
}

std::string attr(const std::string& tag, const std::string& name) {
  std::regex re(name + "\\s*=\\s*[\"']([^\"']*)[\"']", std::regex::icase);
  std::smatch m;
  if (std::regex_search(tag, m, re)) return html_unescape(m[1].str());
  return {};
}

}  // namespace

std::vector<EnvAction> extract_actions(const std::string& html) {
  std::vector<EnvAction> out;
  std::set<std::string> seen;
  auto add = [&](EnvAction a) {
    if (seen.insert(a.describe()).second) out.push_back(std::move(a));
  };

  static const std::regex link_re("<a\\s[^>]*>", std::regex::icase);
  for (auto it = std::sregex_iterator(html.begin(), html.end(), link_re);
       it != std::sregex_iterator(); ++it) {
    std::string href = attr(it->str(), "href");
    if (!href.empty() && href.front() == '/') add(EnvAction::navigate(href));
  }

  static const std::regex form_re("<form\\s([^>]*)>([\\s\\S]*?)</form>", std::regex::icase);
  static const std::regex input_re("<(input|select|textarea)\\s[^>]*>", std::regex::icase);
  for (auto it = std::sregex_iterator(html.begin(), html.end(), form_re);
       it != std::sregex_iterator(); ++it) {
    const std::string open = "<form " + (*it)[1].str() + ">";
    std::string action = attr(open, "action");
    if (action.empty() || action.front() != '/') continue;
    const std::string method = to_lower(attr(open, "method"));
    const std::string body = (*it)[2].str();
    if (method != "post") {
      add(EnvAction::navigate(action));
      continue;
    }
    std::string payload;
    for (auto in = std::sregex_iterator(body.begin(), body.end(), input_re);
         in != std::sregex_iterator(); ++in) {
      const std::string name = attr(in->str(), "name");
      if (name.empty()) continue;
      if (!payload.empty()) payload += '&';
      payload += url_encode(name) + "=" + url_encode(attr(in->str(), "value"));
    }
    add(EnvAction::submit(action, payload));
  }
  return out;
}

}  // namespace envforge
