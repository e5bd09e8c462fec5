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

#include "envforge/synthesis.hpp"

#include <algorithm>

#include "envforge/envpool.hpp"
#include "envforge/util.hpp"
#include "envforge/verify.hpp"

namespace envforge {

using nlohmann::json;

std::string_view to_string(PromptStage stage) {
  switch (stage) {
    case PromptStage::kMetaPrompt: return "meta_prompt";
    case PromptStage::kPlanManifest: return "plan_manifest";
    case PromptStage::kGenerateFile: return "generate_file";
    case PromptStage::kGoldenPath: return "golden_path";
    case PromptStage::kReflect: return "reflect";
  }
  return "unknown";
}

PromptResponse complete_with_retry(Provider& provider, const PromptRequest& request,
                                   int retries) {
  for (int tries = 0;; ++tries) {
    try {
      return provider.complete(request);
    } catch (const TransientError& e) {
      if (tries >= retries)
        throw ProviderUnavailable(std::string(to_string(request.stage)) +
                                  ": provider failed after " + std::to_string(tries + 1) +
                                  " tries: " + e.what());
    }
  }
}

std::vector<std::string> mandatory_prompt_tokens(const ConstraintSet& c) {
  std::vector<std::string> tokens{c.viewport(), "ACTION_EXPLANATION=", "RL_REWARD=",
                                  "NEXT=",      "css",                 "mock"};
  if (c.require_distractors) tokens.emplace_back("distractor");
  return tokens;
}

std::string strip_code_fence(std::string_view text) {
  std::string_view t = trim_view(text);
  if (!t.starts_with("```")) return std::string(t);
  const auto first_nl = t.find('\n');
  if (first_nl == std::string_view::npos) return {};
  t.remove_prefix(first_nl + 1);
  const auto close = t.rfind("```");
  if (close != std::string_view::npos) t = t.substr(0, close);
  return std::string(t);
}

namespace {

constexpr std::string_view kMetaSystem =
    "You design the system prompt for a code model that will build one small, "
    "self-contained web application reproducing only the screens needed for a "
    "single task. The application is an RL training environment: its backend "
    "tracks task progress in memory and reports a reward on standard output. "
    "Write the system prompt the code model should receive.";

std::string meta_user(const SynthesisContext& ctx) {
  const ConstraintSet& c = ctx.constraints;
  std::string out = "Task: " + ctx.task_instruction + "\n";
  out += "Recorded trace (" + std::to_string(ctx.trace.steps.size()) + " steps, " +
         (ctx.trace.succeeded ? "succeeded" : "did not succeed") + "):\n";
  for (const auto& s : ctx.trace.steps) {
    out += "  " + std::to_string(s.index) + ". " + std::string(to_string(s.action.kind)) +
           " " + s.action.target;
    if (s.action.payload) out += " [" + *s.action.payload + "]";
    out += " (screenshot " + s.screenshot_ref + ")\n";
  }
  out += "The prompt you write must require:\n";
  out += "- a mobile layout sized for a " + c.viewport() + " viewport;\n";
  out += "- styling in hand-written CSS that follows the screenshots closely, with no "
         "image files;\n";
  out += "- a mock backend with in-memory data and no calls to external services;\n";
  if (c.require_distractors)
    out += "- at every choice point, between " + std::to_string(c.min_distractors) +
           " and " + std::to_string(c.max_distractors) +
           " distractor options that look valid but are wrong;\n";
  out += "- after each meaningful state change, two stdout lines, flushed: "
         "ACTION_EXPLANATION=<what happened> then RL_REWARD=<value in [0,1]>, "
         "NEXT=<next step or TERMINAL>;\n";
  if (c.no_launch_reward) out += "- a reward of 0.0 for simply opening the app;\n";
  out += "- the server port taken from the PORT environment variable.\n";
  return out;
}

PromptRequest make_request(PromptStage stage, std::string system, std::string user,
                           json context, const CallOptions& options) {
  PromptRequest req;
  req.stage = stage;
  req.system = std::move(system);
  req.user = std::move(user);
  req.context = std::move(context);
  req.sample_index = options.sample_index;
  return req;
}

}  // namespace

SystemPrompt meta_prompt(const SynthesisContext& ctx, Provider& provider,
                         const CallOptions& options) {
  ctx.constraints.validate();
  PromptRequest req = make_request(PromptStage::kMetaPrompt, std::string(kMetaSystem),
                                   meta_user(ctx), to_json(ctx), options);
  for (const auto& s : ctx.trace.steps) req.attachments.push_back(s.screenshot_ref);

  SystemPrompt prompt;
  prompt.text = strip_code_fence(complete_with_retry(provider, req, options.provider_retries).text);
  prompt.context = req.context;

  const std::string lowered = to_lower(prompt.text);
  for (const auto& token : mandatory_prompt_tokens(ctx.constraints)) {
    const bool literal = token.find('=') != std::string::npos;
    const bool found = literal ? prompt.text.find(token) != std::string::npos
                               : lowered.find(to_lower(token)) != std::string::npos;
    if (!found)
      throw AttemptFailed(FailureStage::kPromptInvalid,
                          "system prompt lacks mandatory clause '" + token + "'");
  }
  return prompt;
}

FileManifest plan_manifest(const SystemPrompt& prompt, Provider& provider,
                           const CallOptions& options) {
  PromptRequest req = make_request(
      PromptStage::kPlanManifest, prompt.text,
      "List every file the application needs, before writing any code. Answer with a "
      "JSON object {\"files\": [relative paths]}. Include the server entry point and "
      "at least one HTML template. Do not list image assets.",
      prompt.context, options);
  const std::string text =
      strip_code_fence(complete_with_retry(provider, req, options.provider_retries).text);
  std::vector<std::string> entries;
  try {
    const json j = json::parse(text);
    const json& list = j.is_object() ? j.at("files") : j;
    entries = list.get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw AttemptFailed(FailureStage::kManifestInvalid,
                        std::string("manifest is not a JSON path list: ") + e.what());
  }
  try {
    return FileManifest(std::move(entries));
  } catch (const ValidationError& e) {
    throw AttemptFailed(FailureStage::kManifestInvalid, e.what());
  }
}

std::string generate_file(const SystemPrompt& prompt, const FileManifest& manifest,
                          const std::string& path,
                          const std::map<std::string, std::string>& prior,
                          Provider& provider, const CallOptions& options) {
  const auto& entries = manifest.entries();
  const auto pos = std::find(entries.begin(), entries.end(), path);
  if (pos == entries.end()) throw ContractError("path not in manifest: " + path);
  const std::size_t before = static_cast<std::size_t>(pos - entries.begin());
  if (prior.size() != before)
    throw ContractError("prior must hold exactly the files before " + path);
  for (auto it = entries.begin(); it != pos; ++it)
    if (!prior.count(*it)) throw ContractError("prior is missing " + *it);

  std::string user = "Files planned:\n";
  for (const auto& e : entries) user += "  " + e + "\n";
  for (const auto& [p, content] : prior)
    user += "\n--- " + p + " ---\n" + content + "\n";
  user += "\nWrite the complete content of " + path + ". Answer with the file only.";

  json context = prompt.context;
  context["path"] = path;
  context["manifest"] = entries;
  context["prior_paths"] = json::array();
  for (const auto& [p, _] : prior) context["prior_paths"].push_back(p);

  PromptRequest req =
      make_request(PromptStage::kGenerateFile, prompt.text, user, context, options);
  std::string content =
      strip_code_fence(complete_with_retry(provider, req, options.provider_retries).text);
  if (trim_view(content).empty())
    throw AttemptFailed(FailureStage::kFileInvalid, "empty content for " + path);
  if (path == manifest.server_entry()) {
    for (std::string_view token : {"RL_REWARD=", "ACTION_EXPLANATION="})
      if (content.find(token) == std::string::npos)
        throw AttemptFailed(FailureStage::kFileInvalid,
                            "server file " + path + " never emits " + std::string(token));
  }
  if (!content.ends_with('\n')) content += '\n';
  return content;
}

GoldenPathScript generate_golden_path(const SystemPrompt& prompt,
                                      const FileManifest& manifest,
                                      const std::map<std::string, std::string>& files,
                                      Provider& provider, const CallOptions& options) {
  std::string user;
  for (const auto& p : manifest.entries())
    if (auto it = files.find(p); it != files.end())
      user += "--- " + p + " ---\n" + it->second + "\n";
  user +=
      "\nWrite the ideal action sequence that completes the task in this application "
      "as JSON: {\"steps\": [{\"action\": {\"kind\": navigate|submit|tap|type_text, "
      "\"target\": route or field, \"payload\": string or null}, "
      "\"expect_reward_at_least\": number}]}. The last step must reach 1.0.";
  PromptRequest req =
      make_request(PromptStage::kGoldenPath, prompt.text, user, prompt.context, options);
  const std::string text =
      strip_code_fence(complete_with_retry(provider, req, options.provider_retries).text);
  try {
    GoldenPathScript script = golden_path_from_json(json::parse(text));
    script.validate();
    return script;
  } catch (const json::exception& e) {
    throw AttemptFailed(FailureStage::kFileInvalid,
                        std::string("golden path is not valid JSON: ") + e.what());
  } catch (const Error& e) {
    if (dynamic_cast<const ProviderUnavailable*>(&e)) throw;
    throw AttemptFailed(FailureStage::kFileInvalid,
                        std::string("golden path rejected: ") + e.what());
  }
}

std::optional<int> AttemptLog::succeeded_at() const {
  if (!verified || attempts.empty()) return std::nullopt;
  return attempts.back().attempt;
}

json to_json(const AttemptLog& log) {
  json attempts = json::array();
  for (const auto& a : log.attempts)
    attempts.push_back({{"attempt", a.attempt},
                        {"failure_stage", a.failure ? json(to_string(*a.failure)) : json()},
                        {"reason", a.reason}});
  return {{"task_id", log.task_id}, {"verified", log.verified}, {"attempts", attempts}};
}

AttemptLog attempt_log_from_json(const json& j) {
  try {
    AttemptLog log;
    log.task_id = j.at("task_id").get<std::string>();
    log.verified = j.at("verified").get<bool>();
    for (const auto& a : j.at("attempts")) {
      AttemptRecord r;
      r.attempt = a.at("attempt").get<int>();
      if (auto it = a.find("failure_stage"); it != a.end() && !it->is_null())
        r.failure = failure_stage_from_string(it->get<std::string>());
      r.reason = a.value("reason", std::string());
      log.attempts.push_back(std::move(r));
    }
    return log;
  } catch (const json::exception& e) {
    throw ParseError(std::string("attempt log: ") + e.what());
  }
}

SynthesisResult synthesize_environment(const TaskSpec& task, const Trace& trace,
                                       Provider& provider, const SynthConfig& config,
                                       const BundleVerifier& verifier) {
  if (config.max_attempts < 1) throw ContractError("max_attempts must be >= 1");
  const SynthesisContext ctx = build_context(task, trace, config.constraints);

  SynthesisResult result;
  result.log.task_id = task.id;
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    EnvBundle bundle;
    bundle.task_id = task.id;
    bundle.instruction = task.instruction;
    bundle.attempt = attempt;
    bundle.provider_identity = provider.identity();
    bundle.run_command = config.run_command;
    const CallOptions opts{attempt, config.provider_retries};

    AttemptRecord record;
    record.attempt = attempt;
    try {
      const SystemPrompt prompt = meta_prompt(ctx, provider, opts);
      bundle.manifest = plan_manifest(prompt, provider, opts);
      for (const auto& path : bundle.manifest.entries())
        bundle.files[path] =
            generate_file(prompt, bundle.manifest, path, bundle.files, provider, opts);
      if (auto it = bundle.files.find(std::string(kRewardSpecFile)); it != bundle.files.end()) {
        try {
          bundle.reward_spec = assertion_spec_from_json(json::parse(it->second));
        } catch (const std::exception& e) {
          throw AttemptFailed(FailureStage::kFileInvalid,
                              std::string("reward spec rejected: ") + e.what());
        }
      }
      bundle.golden_path =
          generate_golden_path(prompt, bundle.manifest, bundle.files, provider, opts);

      const VerificationReport report = verifier(bundle);
      if (report.dynamic_passed) {
        bundle.verified = true;
        result.log.attempts.push_back(record);
        result.log.verified = true;
        result.bundle = std::move(bundle);
        return result;
      }
      record.failure = report.static_passed ? FailureStage::kDynamicTestFailed
                                            : FailureStage::kReflectionRejected;
      record.reason = report.detail.empty() ? std::string(to_string(report.failure_stage))
                                            : report.detail;
    } catch (const AttemptFailed& e) {
      record.failure = e.stage();
      record.reason = e.what();
    }
    bundle.failure_stage = record.failure;
    result.log.attempts.push_back(std::move(record));
    result.bundle = std::move(bundle);
  }
  return result;
}

SynthesisResult synthesize_environment(const TaskSpec& task, const Trace& trace,
                                       Provider& provider, const SynthConfig& config,
                                       EnvPool& pool) {
  return synthesize_environment(task, trace, provider, config,
                                [&](const EnvBundle& bundle) {
                                  return evaluate_bundle(bundle, provider, pool);
                                });
}

}  // namespace envforge
