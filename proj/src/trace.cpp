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

#include "envforge/trace.hpp"

#include <istream>
#include <ostream>
#include <set>

namespace envforge {

using nlohmann::json;

std::string_view to_string(TraceActionKind kind) {
  switch (kind) {
    case TraceActionKind::kTap:
      return "tap";
    case TraceActionKind::kTypeText:
      return "type_text";
    case TraceActionKind::kScroll:
      return "scroll";
    case TraceActionKind::kNavigate:
      return "navigate";
    case TraceActionKind::kSubmit:
      return "submit";
  }
  return "unknown";
}

TraceActionKind trace_action_kind_from_string(std::string_view text) {
  if (text == "tap") return TraceActionKind::kTap;
  if (text == "type_text") return TraceActionKind::kTypeText;
  if (text == "scroll") return TraceActionKind::kScroll;
  if (text == "navigate") return TraceActionKind::kNavigate;
  if (text == "submit") return TraceActionKind::kSubmit;
  throw ParseError("unknown trace action kind '" + std::string(text) + "'");
}

void Trace::validate() const {
  if (task_id.empty()) throw ValidationError("trace has an empty task_id");
  if (steps.empty())
    throw ValidationError("trace '" + task_id + "' has no steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].index != i)
      throw ValidationError("trace '" + task_id + "': step index " +
                            std::to_string(steps[i].index) + " at position " +
                            std::to_string(i));
  }
}

TraceSet::TraceSet(std::vector<Trace> traces) : traces_(std::move(traces)) {
  std::set<std::string_view> seen;
  for (const auto& t : traces_) {
    t.validate();
    if (!seen.insert(t.task_id).second)
      throw ValidationError("duplicate task_id '" + t.task_id + "'");
  }
}

const Trace* TraceSet::find(std::string_view task_id) const {
  for (const auto& t : traces_)
    if (t.task_id == task_id) return &t;
  return nullptr;
}

namespace {

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_string())
    throw ParseError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

Trace trace_from_json(const json& record) {
  if (!record.is_object()) throw ParseError("trace record must be an object");
  const json& v = require(record, "v");
  if (!v.is_number_integer() || v.get<int>() != kTraceSchemaVersion)
    throw ParseError("unsupported trace schema version");

  Trace trace;
  trace.task_id = require_string(record, "task_id");
  const json& ok = require(record, "succeeded");
  if (!ok.is_boolean()) throw ParseError("field 'succeeded' must be a boolean");
  trace.succeeded = ok.get<bool>();

  const json& steps = require(record, "steps");
  if (!steps.is_array()) throw ParseError("field 'steps' must be an array");
  for (const json& s : steps) {
    if (!s.is_object()) throw ParseError("step must be an object");
    TraceStep step;
    const json& idx = require(s, "i");
    if (!idx.is_number_unsigned() && !idx.is_number_integer())
      throw ParseError("step field 'i' must be an integer");
    if (idx.get<long long>() < 0) throw ParseError("step index is negative");
    step.index = idx.get<std::size_t>();
    step.screenshot_ref = require_string(s, "screenshot");
    const json& a = require(s, "action");
    if (!a.is_object()) throw ParseError("step action must be an object");
    step.action.kind = trace_action_kind_from_string(require_string(a, "kind"));
    step.action.target = require_string(a, "target");
    if (auto p = a.find("payload"); p != a.end() && !p->is_null()) {
      if (!p->is_string()) throw ParseError("action payload must be a string");
      step.action.payload = p->get<std::string>();
    }
    trace.steps.push_back(std::move(step));
  }
  try {
    trace.validate();
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
  return trace;
}

json to_json(const Trace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps) {
    json action{{"kind", to_string(s.action.kind)}, {"target", s.action.target}};
    action["payload"] = s.action.payload ? json(*s.action.payload) : json();
    steps.push_back(
        {{"i", s.index}, {"screenshot", s.screenshot_ref}, {"action", action}});
  }
  return {{"v", kTraceSchemaVersion},
          {"task_id", trace.task_id},
          {"succeeded", trace.succeeded},
          {"steps", steps}};
}

IngestResult ingest_traces(std::istream& source) {
  IngestReport report;
  std::vector<Trace> traces;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++report.lines_read;
    try {
      Trace t = trace_from_json(json::parse(line));
      if (!seen.insert(t.task_id).second)
        throw ParseError("duplicate task_id '" + t.task_id + "'");
      traces.push_back(std::move(t));
      ++report.accepted;
    } catch (const json::exception& e) {
      report.errors.push_back({line_no, e.what()});
    } catch (const ParseError& e) {
      report.errors.push_back({line_no, e.what()});
    }
  }
  if (traces.empty())
    throw EmptyTraceSetError("no valid trace records", std::move(report));
  return {TraceSet(std::move(traces)), std::move(report)};
}

void write_traces(std::ostream& out, const TraceSet& set) {
  for (const auto& t : set.traces()) out << to_json(t).dump() << '\n';
}

std::pair<TraceSet, ClipStats> clip_traces(const TraceSet& set,
                                           std::size_t max_steps) {
  if (max_steps < 1) throw ContractError("max_steps must be >= 1");
  std::vector<Trace> kept;
  ClipStats stats;
  double total = 0.0;
  for (const auto& t : set.traces()) {
    if (t.steps.size() > max_steps) {
      ++stats.removed;
      continue;
    }
    total += static_cast<double>(t.steps.size());
    kept.push_back(t);
  }
  stats.kept = kept.size();
  stats.mean_length = stats.kept ? total / static_cast<double>(stats.kept) : 0.0;
  return {TraceSet(std::move(kept)), stats};
}

void ConstraintSet::validate() const {
  if (viewport_w <= 0 || viewport_h <= 0)
    throw ContractError("viewport dimensions must be positive");
  if (require_distractors &&
      (min_distractors < 0 || min_distractors > max_distractors))
    throw ContractError("distractor bounds must satisfy 0 <= min <= max");
}

std::string ConstraintSet::viewport() const {
  return std::to_string(viewport_w) + "x" + std::to_string(viewport_h);
}

json to_json(const ConstraintSet& c) {
  return {{"viewport_w", c.viewport_w},
          {"viewport_h", c.viewport_h},
          {"require_distractors", c.require_distractors},
          {"min_distractors", c.min_distractors},
          {"max_distractors", c.max_distractors},
          {"no_launch_reward", c.no_launch_reward}};
}

ConstraintSet constraint_set_from_json(const json& j) {
  ConstraintSet c;
  c.viewport_w = j.value("viewport_w", c.viewport_w);
  c.viewport_h = j.value("viewport_h", c.viewport_h);
  c.require_distractors = j.value("require_distractors", c.require_distractors);
  c.min_distractors = j.value("min_distractors", c.min_distractors);
  c.max_distractors = j.value("max_distractors", c.max_distractors);
  c.no_launch_reward = j.value("no_launch_reward", c.no_launch_reward);
  c.validate();
  return c;
}

namespace {

json to_json(const GoalHint& g) {
  return {{"id", g.id},         {"kind", g.kind},
          {"route", g.route},   {"field", g.field},
          {"answer", g.answer}, {"distractors", g.distractors}};
}

GoalHint goal_from_json(const json& j) {
  GoalHint g;
  g.id = require_string(j, "id");
  g.kind = j.value("kind", std::string("input"));
  if (g.kind != "input" && g.kind != "select")
    throw ParseError("goal kind must be 'input' or 'select'");
  g.route = require_string(j, "route");
  g.field = j.value("field", std::string());
  g.answer = require_string(j, "answer");
  g.distractors = j.value("distractors", std::vector<std::string>{});
  return g;
}

}  // namespace

json to_json(const TaskSpec& task) {
  json goals = json::array();
  for (const auto& g : task.goals) goals.push_back(to_json(g));
  return {{"id", task.id}, {"instruction", task.instruction}, {"goals", goals}};
}

TaskSpec task_spec_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("task record must be an object");
  TaskSpec task;
  task.id = require_string(j, "id");
  task.instruction = require_string(j, "instruction");
  if (auto it = j.find("goals"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseError("field 'goals' must be an array");
    for (const auto& g : *it) task.goals.push_back(goal_from_json(g));
  }
  return task;
}

std::vector<TaskSpec> read_tasks(std::istream& source) {
  std::vector<TaskSpec> tasks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      tasks.push_back(task_spec_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError("tasks line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("tasks line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return tasks;
}

SynthesisContext build_context(const TaskSpec& task, const Trace& trace,
                               const ConstraintSet& constraints) {
  if (task.instruction.empty())
    throw ContractError("task instruction must not be empty");
  if (trace.task_id != task.id)
    throw ContractError("trace task_id '" + trace.task_id +
                        "' does not match task id '" + task.id + "'");
  constraints.validate();
  return {task.id, task.instruction, trace, constraints, task.goals};
}

json to_json(const SynthesisContext& ctx) {
  json goals = json::array();
  for (const auto& g : ctx.goals) goals.push_back(to_json(g));
  return {{"task_id", ctx.task_id},
          {"instruction", ctx.task_instruction},
          {"trace", to_json(ctx.trace)},
          {"constraints", to_json(ctx.constraints)},
          {"goals", goals}};
}

}  // namespace envforge
