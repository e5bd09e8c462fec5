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

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace envforge {

// An HTTP-level interaction with an environment.
//
//   navigate  -> GET target
//   submit    -> POST target, payload is an urlencoded form body
//   tap       -> POST target with an empty body
//   type_text -> client-side only; folded into the next submit
//   stop      -> ends the episode, carries no target or payload
enum class EnvActionKind { kNavigate, kSubmit, kTap, kTypeText, kStop };

std::string_view to_string(EnvActionKind kind);
EnvActionKind env_action_kind_from_string(std::string_view text);

struct EnvAction {
  EnvActionKind kind = EnvActionKind::kNavigate;
  std::string target;
  std::optional<std::string> payload;

  static EnvAction navigate(std::string target);
  static EnvAction submit(std::string target, std::string payload);
  static EnvAction tap(std::string target);
  static EnvAction type_text(std::string field, std::string text);
  static EnvAction stop();

  // Throws ContractError when the action violates its kind's shape.
  void validate() const;

  std::string describe() const;

  friend bool operator==(const EnvAction&, const EnvAction&) = default;
};

nlohmann::json to_json(const EnvAction& action);
EnvAction env_action_from_json(const nlohmann::json& j);

}  // namespace envforge
