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

#include "envforge/mock_provider.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "envforge/error.hpp"
#include "envforge/util.hpp"

namespace envforge {

using nlohmann::json;

namespace {

double unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

std::string slug(std::string_view text) {
  std::string out;
  for (char c : text) {
    const unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) out += static_cast<char>(std::tolower(u));
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "x" : out;
}

constexpr std::string_view kServerTemplate = R"PY(import html
import json
import os
from http.server import BaseHTTPRequestHandler, HTTPServer
from string import Template
from urllib.parse import parse_qs, unquote

CONFIG = json.loads(@CONFIG@)
HERE = os.path.dirname(os.path.abspath(__file__))
STATE = {"satisfied": set(), "launched": False}


def fmt(value):
    text = "%.4f" % value
    text = text.rstrip("0")
    return text + "0" if text.endswith(".") else text


def emit(explanation, reward, hint):
    print("ACTION_EXPLANATION=" + explanation, flush=True)
    print("RL_REWARD=" + fmt(reward) + ", NEXT=" + hint, flush=True)


def calculate_reward():
    units = sum(g["weight_bp"] for g in CONFIG["goals"] if g["id"] in STATE["satisfied"])
    return min(1.0, units / 10000.0)


def next_hint():
    for goal in CONFIG["goals"]:
        if goal["id"] not in STATE["satisfied"]:
            return goal["hint"]
    return "TERMINAL"


def mark(goal, ok):
    if ok:
        STATE["satisfied"].add(goal["id"])
    else:
        STATE["satisfied"].discard(goal["id"])


def render(body):
    with open(os.path.join(HERE, "templates", "index.html"), encoding="utf-8") as f:
        page = Template(f.read())
    return page.safe_substitute(title=html.escape(CONFIG["title"]), body=body)


def home_body():
    parts = ["<h1>%s</h1>" % html.escape(CONFIG["title"])]
    for goal in CONFIG["goals"]:
        if goal["kind"] == "input":
            parts.append(
                '<form action="%s" method="post"><label>%s <input name="%s" value=""></label>'
                "<button>Go</button></form>"
                % (html.escape(goal["route"]), html.escape(goal["field"]), html.escape(goal["field"]))
            )
        else:
            links = "".join(
                '<li><a href="%s/%s">%s</a></li>'
                % (html.escape(goal["route"]), html.escape(o), html.escape(o))
                for o in goal["options"]
            )
            parts.append("<ul>%s</ul>" % links)
    return "\n".join(parts)


class Handler(BaseHTTPRequestHandler):
    def log_message(self, format, *args):
        pass

    def send_body(self, status, body, ctype="text/html; charset=utf-8"):
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def route(self):
        return unquote(self.path.split("?", 1)[0])

    def select(self, path):
        for goal in CONFIG["goals"]:
            prefix = goal["route"] + "/"
            if goal["kind"] != "select" or not path.startswith(prefix):
                continue
            option = path[len(prefix):]
            if option not in goal["options"]:
                return False
            mark(goal, option == goal["answer"])
            emit("Selected %s" % option, calculate_reward(), next_hint())
            self.send_body(200, render("<p>Selected %s</p>%s" % (html.escape(option), home_body())))
            return True
        return False

    def do_GET(self):
        path = self.route()
        if path == "/":
            if not STATE["launched"]:
                STATE["launched"] = True
                emit("App opened on the home page", 0.0, next_hint())
            self.send_body(200, render(home_body()))
            return
        if path == "/static/styles.css":
            with open(os.path.join(HERE, "static", "styles.css"), encoding="utf-8") as f:
                self.send_body(200, f.read(), "text/css")
            return
        if not self.select(path):
            self.send_body(404, "not found")

    def do_POST(self):
        path = self.route()
        length = int(self.headers.get("Content-Length") or 0)
        form = parse_qs(self.rfile.read(length).decode("utf-8"), keep_blank_values=True)
        for goal in CONFIG["goals"]:
            if goal["kind"] == "input" and goal["route"] == path:
                value = form.get(goal["field"], [""])[-1].strip()
                mark(goal, value.lower() == goal["answer"].lower())
                emit("Entered %s=%s" % (goal["field"], value), calculate_reward(), next_hint())
                self.send_body(200, render("<p>%s</p>%s" % (html.escape(value), home_body())))
                return
        if not self.select(path):
            self.send_body(404, "not found")


if __name__ == "__main__":
    port = int(os.environ.get("PORT", "8000"))
    HTTPServer(("0.0.0.0", port), Handler).serve_forever()
)PY";

constexpr std::string_view kPageTemplate = R"(<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<meta name="viewport" content="width=@W@, height=@H@, initial-scale=1">
<title>$title</title>
<link rel="stylesheet" href="/static/styles.css">
</head>
<body>
<main class="screen">
$body
</main>
</body>
</html>
)";

constexpr std::string_view kStylesTemplate = R"(* { box-sizing: border-box; }
body { margin: 0; background: #ededed; font-family: -apple-system, "PingFang SC", sans-serif; }
.screen { width: @W@px; min-height: @H@px; margin: 0 auto; padding: 16px; background: #fff; }
h1 { font-size: 18px; margin: 0 0 12px; }
form { display: flex; gap: 8px; margin-bottom: 12px; }
input { flex: 1; padding: 8px; border: 1px solid #ccc; border-radius: 6px; }
button { padding: 8px 14px; border: 0; border-radius: 6px; background: #07c160; color: #fff; }
ul { list-style: none; padding: 0; }
li a { display: block; padding: 10px 0; border-bottom: 1px solid #f0f0f0; color: #111; text-decoration: none; }
)";

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

ConstraintSet constraints_of(const json& context) {
  if (auto it = context.find("constraints"); it != context.end())
    return constraint_set_from_json(*it);
  return {};
}

std::string title_of(const json& context) {
  return context.value("instruction", std::string("Task"));
}

json server_config(const json& context, const std::vector<MockGoal>& goals,
                   bool sabotage) {
  json list = json::array();
  for (std::size_t i = 0; i < goals.size(); ++i) {
    const MockGoal& g = goals[i];
    std::string hint = g.kind == "input" ? "enter " + g.field : "choose on " + g.route;
    json entry{{"id", g.id},         {"kind", g.kind},       {"route", g.route},
               {"field", g.field},   {"answer", g.answer},   {"options", g.options},
               {"weight_bp", g.weight_bp}, {"hint", hint}};
    // A subtly broken server: the first goal can never be satisfied.
    if (sabotage && i == 0) entry["answer"] = g.answer + "\x7f";
    list.push_back(std::move(entry));
  }
  return {{"title", title_of(context)}, {"goals", list}};
}

std::string server_source(const json& context, const std::vector<MockGoal>& goals,
                          bool sabotage, bool drop_protocol) {
  const std::string literal = json(server_config(context, goals, sabotage).dump()).dump(-1, ' ', true);
  std::string src = replace_all(std::string(kServerTemplate), "@CONFIG@", literal);
  if (drop_protocol) {
    src = replace_all(src, "RL_REWARD=", "reward: ");
    src = replace_all(src, "ACTION_EXPLANATION=", "note: ");
  }
  return src;
}

json reward_spec_json(const std::vector<MockGoal>& goals) {
  json list = json::array();
  for (const auto& g : goals) {
    std::string desc = g.kind == "input" ? g.field + " is " + g.answer
                                         : g.answer + " chosen on " + g.route;
    list.push_back({{"id", g.id}, {"weight", g.weight_bp / 10000.0}, {"description", desc}});
  }
  return {{"assertions", list}};
}

json actions_json(const std::vector<MockGoal>& goals) {
  json list = json::array();
  list.push_back(to_json(EnvAction::navigate("/")));
  for (const auto& g : goals)
    for (const auto& o : g.options)
      list.push_back(to_json(g.kind == "input"
                                 ? EnvAction::submit(g.route, url_encode(g.field) + "=" + url_encode(o))
                                 : EnvAction::navigate(g.route + "/" + o)));
  return {{"actions", list}};
}

json golden_json(const std::vector<MockGoal>& goals) {
  GoldenPathScript script;
  script.steps.push_back({EnvAction::navigate("/"), 0.0});
  int units = 0;
  for (const auto& g : goals) {
    units += g.weight_bp;
    const double expect = units >= 10000 ? 1.0 : units / 10000.0;
    script.steps.push_back(
        {g.kind == "input"
             ? EnvAction::submit(g.route, url_encode(g.field) + "=" + url_encode(g.answer))
             : EnvAction::navigate(g.route + "/" + g.answer),
         expect});
  }
  return to_json(script);
}

std::string meta_response(const json& context, bool drop_reward_clause) {
  const ConstraintSet c = constraints_of(context);
  std::string out = "You build a single-task mobile web app: " + title_of(context) + "\n\n";
  out += "Layout: render every screen for a " + c.viewport() +
         " viewport; size containers in px against that frame.\n";
  out += "Styling: write plain CSS by hand that mirrors the reference screenshots; do "
         "not ship image files, draw icons with CSS or text.\n";
  out += "Backend: mock all data in memory inside the server; never call a real API.\n";
  if (c.require_distractors)
    out += "Choices: every list the user picks from offers " +
           std::to_string(c.min_distractors) + "-" + std::to_string(c.max_distractors) +
           " distractor entries next to the right one.\n";
  out += "Progress: keep a state dict of completed sub-goals and compute the reward in "
         "calculate_reward().\n";
  if (!drop_reward_clause)
    out += "Reporting: after each state change print ACTION_EXPLANATION=<text> and then "
           "RL_REWARD=<value>, NEXT=<hint>, flushing stdout.\n";
  if (c.no_launch_reward) out += "Opening the app is worth 0.0.\n";
  out += "Serve on the port in the PORT environment variable.\n";
  return out;
}

std::string reflect_answer(const MockProviderOptions& opts, bool reject) {
  if (opts.reflection_answer) return *opts.reflection_answer;
  return reject ? "no" : "yes";
}

}  // namespace

std::vector<GoalHint> goals_from_trace(const Trace& trace) {
  std::vector<GoalHint> goals;
  std::set<std::string> routes;
  std::vector<std::pair<std::string, std::string>> typed;
  for (const auto& step : trace.steps) {
    const ActionRecord& a = step.action;
    if (a.kind == TraceActionKind::kTypeText) {
      typed.emplace_back(a.target, a.payload.value_or(""));
      continue;
    }
    if (a.kind == TraceActionKind::kSubmit) {
      std::string field, value;
      if (a.payload && a.payload->find('=') != std::string::npos) {
        const auto eq = a.payload->find('=');
        field = url_decode(a.payload->substr(0, eq));
        std::string rest = a.payload->substr(eq + 1);
        value = url_decode(rest.substr(0, rest.find('&')));
      } else if (!typed.empty()) {
        field = typed.back().first;
        value = typed.back().second;
      }
      typed.clear();
      if (field.empty() || value.empty() || !a.target.starts_with('/')) continue;
      if (!routes.insert(a.target).second) continue;
      goals.push_back({"goal_" + std::to_string(goals.size() + 1) + "_" + slug(field), "input",
                       a.target, field, value, {}});
      continue;
    }
    if (a.kind == TraceActionKind::kNavigate || a.kind == TraceActionKind::kTap) {
      const std::string& t = a.target;
      const auto cut = t.rfind('/');
      if (!t.starts_with('/') || cut == 0 || cut == std::string::npos || cut + 1 >= t.size())
        continue;
      const std::string route = t.substr(0, cut);
      if (!routes.insert(route).second) continue;
      goals.push_back({"goal_" + std::to_string(goals.size() + 1) + "_" + slug(route), "select",
                       route, "", t.substr(cut + 1), {}});
    }
  }
  return goals;
}

std::vector<MockGoal> mock_goals(const json& context, std::uint64_t seed) {
  const ConstraintSet c = constraints_of(context);
  std::vector<GoalHint> hints;
  if (auto it = context.find("goals"); it != context.end() && !it->empty()) {
    for (const auto& g : *it) {
      GoalHint h;
      h.id = g.value("id", std::string());
      h.kind = g.value("kind", std::string("input"));
      h.route = g.value("route", std::string());
      h.field = g.value("field", std::string());
      h.answer = g.value("answer", std::string());
      h.distractors = g.value("distractors", std::vector<std::string>{});
      hints.push_back(std::move(h));
    }
  } else if (auto tr = context.find("trace"); tr != context.end()) {
    hints = goals_from_trace(trace_from_json(*tr));
  }
  if (hints.empty()) hints.push_back({"task_complete", "select", "/finish", "", "done", {}});

  const int n = static_cast<int>(hints.size());
  std::vector<MockGoal> goals;
  for (int i = 0; i < n; ++i) {
    const GoalHint& h = hints[i];
    // Layout randomness follows the goal content, not the task id.
    const std::uint64_t gs = mix_seed(seed, fnv1a(h.route + "\n" + h.answer));
    MockGoal g{h.id, h.kind, h.route, h.field, h.answer, {}, 0};
    std::vector<std::string> wrong;
    for (const auto& d : h.distractors)
      if (d != h.answer && std::find(wrong.begin(), wrong.end(), d) == wrong.end())
        wrong.push_back(d);
    if (c.require_distractors) {
      const int span = c.max_distractors - c.min_distractors + 1;
      const int want = c.min_distractors + static_cast<int>(gs % span);
      for (int k = 1; static_cast<int>(wrong.size()) < want; ++k) {
        std::string alt = h.answer + "-" + std::to_string(k);
        if (std::find(wrong.begin(), wrong.end(), alt) == wrong.end()) wrong.push_back(alt);
      }
      wrong.resize(want);
    }
    g.options = wrong;
    const std::size_t slot = wrong.empty() ? 0 : mix_seed(gs, 1) % (wrong.size() + 1);
    g.options.insert(g.options.begin() + static_cast<std::ptrdiff_t>(slot), h.answer);
    g.weight_bp = i + 1 < n ? 10000 / n : 10000 - (n - 1) * (10000 / n);
    goals.push_back(std::move(g));
  }
  return goals;
}

MockProvider::MockProvider(MockProviderOptions options) : options_(std::move(options)) {
  if (!(options_.success_probability >= 0.0 && options_.success_probability <= 1.0))
    throw ContractError("success_probability must lie in [0, 1]");
  if (options_.failure_stages.empty() && options_.success_probability < 1.0)
    throw ContractError("failure_stages must not be empty");
}

std::string MockProvider::identity() const {
  return "mock-template/1 seed=" + std::to_string(options_.seed);
}

std::optional<FailureStage> MockProvider::planned_failure(const std::string& task_id,
                                                          int sample_index) const {
  if (sample_index <= 0) return std::nullopt;
  if (auto it = options_.scripts.find(task_id); it != options_.scripts.end()) {
    const auto& script = it->second;
    if (static_cast<std::size_t>(sample_index) <= script.size())
      return script[sample_index - 1];
    return std::nullopt;
  }
  const std::uint64_t h =
      mix_seed(mix_seed(options_.seed, fnv1a(task_id)), static_cast<std::uint64_t>(sample_index));
  if (unit(h) < options_.success_probability) return std::nullopt;
  return options_.failure_stages[mix_seed(h, 2) % options_.failure_stages.size()];
}

PromptResponse MockProvider::complete(const PromptRequest& request) {
  const std::size_t n = calls_.fetch_add(1);
  stage_calls_[static_cast<int>(request.stage)].fetch_add(1);
  if (static_cast<int>(n) < options_.transient_failures)
    throw TransientError("mock provider: simulated transient failure");

  const json& ctx = request.context;
  const std::string task_id = ctx.value("task_id", std::string());
  const auto failure = planned_failure(task_id, request.sample_index);
  auto failing = [&](FailureStage s) { return failure && *failure == s; };

  switch (request.stage) {
    case PromptStage::kMetaPrompt:
      return {meta_response(ctx, failing(FailureStage::kPromptInvalid))};
    case PromptStage::kPlanManifest: {
      std::vector<std::string> files{"app.py", "templates/index.html", "static/styles.css",
                                     std::string(kRewardSpecFile), std::string(kActionsFile)};
      if (failing(FailureStage::kManifestInvalid)) files.insert(files.begin() + 2, "static/logo.png");
      return {json{{"files", files}}.dump()};
    }
    case PromptStage::kGenerateFile: {
      const std::string path = ctx.value("path", std::string());
      const ConstraintSet c = constraints_of(ctx);
      const auto goals = mock_goals(ctx, options_.seed);
      if (path == "app.py")
        return {server_source(ctx, goals, failing(FailureStage::kDynamicTestFailed),
                              failing(FailureStage::kFileInvalid))};
      const std::string w = std::to_string(c.viewport_w), hgt = std::to_string(c.viewport_h);
      if (path == "templates/index.html")
        return {replace_all(replace_all(std::string(kPageTemplate), "@W@", w), "@H@", hgt)};
      if (path == "static/styles.css")
        return {replace_all(replace_all(std::string(kStylesTemplate), "@W@", w), "@H@", hgt)};
      if (path == kRewardSpecFile) return {reward_spec_json(goals).dump(2)};
      if (path == kActionsFile) return {actions_json(goals).dump(2)};
      return {"placeholder for " + path + "\n"};
    }
    case PromptStage::kGoldenPath:
      return {golden_json(mock_goals(ctx, options_.seed)).dump(2)};
    case PromptStage::kReflect:
      return {reflect_answer(options_, failing(FailureStage::kReflectionRejected))};
  }
  throw ContractError("unknown prompt stage");
}

}  // namespace envforge
