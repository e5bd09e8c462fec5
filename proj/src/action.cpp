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

#include "envforge/action.hpp"

#include "envforge/error.hpp"

namespace envforge {

std::string_view to_string(EnvActionKind kind) {
  switch (kind) {
    case EnvActionKind::kNavigate:
      return "navigate";
    case EnvActionKind::kSubmit:
      return "submit";
    case EnvActionKind::kTap:
      return "tap";
    case EnvActionKind::kTypeText:
      return "type_text";
    case EnvActionKind::kStop:
      return "stop";
  }
  return "unknown";
}

EnvActionKind env_action_kind_from_string(std::string_view text) {
  if (text == "navigate") return EnvActionKind::kNavigate;
  if (text == "submit") return EnvActionKind::kSubmit;
  if (text == "tap") return EnvActionKind::kTap;
  if (text == "type_text") return EnvActionKind::kTypeText;
  if (text == "stop") return EnvActionKind::kStop;
  throw ParseError("unknown action kind '" + std::string(text) + "'");
}

EnvAction EnvAction::navigate(std::string target) {
  return {EnvActionKind::kNavigate, std::move(target), std::nullopt};
}

EnvAction EnvAction::submit(std::string target, std::string payload) {
  return {EnvActionKind::kSubmit, std::move(target), std::move(payload)};
}

EnvAction EnvAction::tap(std::string target) {
  return {EnvActionKind::kTap, std::move(target), std::nullopt};
}

EnvAction EnvAction::type_text(std::string field, std::string text) {
  return {EnvActionKind::kTypeText, std::move(field), std::move(text)};
}

EnvAction EnvAction::stop() { return {EnvActionKind::kStop, {}, std::nullopt}; }

void EnvAction::validate() const {
  if (kind == EnvActionKind::kStop) {
    if (!target.empty() || payload)
      throw ContractError("stop action must not carry a target or payload");
    return;
  }
  if (target.empty())
    throw ContractError(std::string(to_string(kind)) + " action needs a target");
  if (kind == EnvActionKind::kTypeText && !payload)
    throw ContractError("type_text action needs a payload");
  if (kind != EnvActionKind::kTypeText && target.front() != '/')
    throw ContractError("route target must start with '/': " + target);
}

std::string EnvAction::describe() const {
  std::string out(to_string(kind));
  if (!target.empty()) out += " " + target;
  if (payload) out += " [" + *payload + "]";
  return out;
}

nlohmann::json to_json(const EnvAction& action) {
  nlohmann::json j;
  j["kind"] = to_string(action.kind);
  j["target"] = action.target;
  j["payload"] = action.payload ? nlohmann::json(*action.payload) : nlohmann::json();
  return j;
}

EnvAction env_action_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("action must be an object");
  EnvAction action;
  action.kind = env_action_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("target") && !j["target"].is_null())
    action.target = j["target"].get<std::string>();
  if (j.contains("payload") && !j["payload"].is_null())
    action.payload = j["payload"].get<std::string>();
  return action;
}

}  // namespace envforge
