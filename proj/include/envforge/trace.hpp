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
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "envforge/error.hpp"

namespace envforge {

enum class TraceActionKind { kTap, kTypeText, kScroll, kNavigate, kSubmit };

std::string_view to_string(TraceActionKind kind);
TraceActionKind trace_action_kind_from_string(std::string_view text);

struct ActionRecord {
  TraceActionKind kind = TraceActionKind::kTap;
  std::string target;
  std::optional<std::string> payload;

  friend bool operator==(const ActionRecord&, const ActionRecord&) = default;
};

struct TraceStep {
  std::size_t index = 0;
  // Opaque asset reference. Never opened or decoded here.
  std::string screenshot_ref;
  ActionRecord action;

  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct Trace {
  std::string task_id;
  std::vector<TraceStep> steps;
  // Whether the collecting agent finished the task. Failed traces are kept.
  bool succeeded = false;

  // Throws ValidationError on an empty task id, empty steps, or index gaps.
  void validate() const;

  friend bool operator==(const Trace&, const Trace&) = default;
};

// Immutable, validated collection of traces with unique task ids.
class TraceSet {
 public:
  TraceSet() = default;
  explicit TraceSet(std::vector<Trace> traces);

  const std::vector<Trace>& traces() const noexcept { return traces_; }
  std::size_t size() const noexcept { return traces_.size(); }
  bool empty() const noexcept { return traces_.empty(); }
  const Trace* find(std::string_view task_id) const;

  friend bool operator==(const TraceSet&, const TraceSet&) = default;

 private:
  std::vector<Trace> traces_;
};

struct IngestIssue {
  std::size_t line_no = 0;  // 1-based
  std::string message;
};

struct IngestReport {
  std::size_t lines_read = 0;
  std::size_t accepted = 0;
  std::vector<IngestIssue> errors;
};

struct IngestResult {
  TraceSet traces;
  IngestReport report;
};

// Raised when a trace stream yields no valid record at all.
class EmptyTraceSetError : public Error {
 public:
  EmptyTraceSetError(const std::string& what, IngestReport report)
      : Error(what), report_(std::move(report)) {}
  const IngestReport& report() const noexcept { return report_; }

 private:
  IngestReport report_;
};

inline constexpr int kTraceSchemaVersion = 1;

// Reads one JSON trace record per line. Blank lines are skipped; malformed
// lines are reported and skipped.
IngestResult ingest_traces(std::istream& source);

Trace trace_from_json(const nlohmann::json& record);
nlohmann::json to_json(const Trace& trace);
void write_traces(std::ostream& out, const TraceSet& set);

struct ClipStats {
  std::size_t kept = 0;
  std::size_t removed = 0;
  double mean_length = 0.0;  // 0 when nothing is kept
};

// Drops every trace with more than max_steps steps.
std::pair<TraceSet, ClipStats> clip_traces(const TraceSet& set,
                                           std::size_t max_steps);

// Constraints passed through the meta-prompt to the code model.
struct ConstraintSet {
  int viewport_w = 410;
  int viewport_h = 858;
  bool require_distractors = true;
  int min_distractors = 3;
  int max_distractors = 5;
  bool no_launch_reward = true;

  void validate() const;
  std::string viewport() const;  // "410x858"

  friend bool operator==(const ConstraintSet&, const ConstraintSet&) = default;
};

nlohmann::json to_json(const ConstraintSet& c);
ConstraintSet constraint_set_from_json(const nlohmann::json& j);

// Optional structured hint describing one sub-goal of a task. Only the mock
// provider reads these; live providers work from the instruction text.
struct GoalHint {
  std::string id;
  std::string kind;  // "input" or "select"
  std::string route;
  std::string field;   // input goals
  std::string answer;  // expected value or option id
  std::vector<std::string> distractors;

  friend bool operator==(const GoalHint&, const GoalHint&) = default;
};

struct TaskSpec {
  std::string id;
  std::string instruction;
  std::vector<GoalHint> goals;
};

nlohmann::json to_json(const TaskSpec& task);
TaskSpec task_spec_from_json(const nlohmann::json& j);
// One JSON task per line: {"id", "instruction", "goals"?}.
std::vector<TaskSpec> read_tasks(std::istream& source);

struct SynthesisContext {
  std::string task_id;
  std::string task_instruction;
  Trace trace;
  ConstraintSet constraints;
  std::vector<GoalHint> goals;
};

SynthesisContext build_context(const TaskSpec& task, const Trace& trace,
                               const ConstraintSet& constraints = {});

nlohmann::json to_json(const SynthesisContext& ctx);

}  // namespace envforge
