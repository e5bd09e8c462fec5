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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "envforge/action.hpp"
#include "envforge/reward.hpp"

namespace envforge {

// Ordered list of relative file paths planned for an environment.
//
// Invariants: paths are relative and normalized with no parent escapes, no
// duplicates, no image assets, at least one server entry and at least one
// page template entry.
class FileManifest {
 public:
  FileManifest() = default;
  // Throws ValidationError on any invariant violation.
  explicit FileManifest(std::vector<std::string> entries);

  const std::vector<std::string>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  bool contains(std::string_view path) const;
  // First entry recognized as the backend entry point.
  const std::string& server_entry() const;

  static bool is_server_path(std::string_view path);
  static bool is_page_path(std::string_view path);
  static bool is_image_path(std::string_view path);
  // Throws ValidationError when path is absolute, unnormalized, or escapes.
  static void check_path(std::string_view path);

  friend bool operator==(const FileManifest&, const FileManifest&) = default;

 private:
  std::vector<std::string> entries_;
};

struct GoldenStep {
  EnvAction action;
  double expect_reward_at_least = 0.0;

  friend bool operator==(const GoldenStep&, const GoldenStep&) = default;
};

// Ideal action sequence that completes the task, with reward milestones.
struct GoldenPathScript {
  std::vector<GoldenStep> steps;

  // Non-empty, milestones in [0, 1] and non-decreasing, final >= 1 - eps.
  void validate() const;

  friend bool operator==(const GoldenPathScript&, const GoldenPathScript&) = default;
};

nlohmann::json to_json(const GoldenPathScript& script);
GoldenPathScript golden_path_from_json(const nlohmann::json& j);

// Why a synthesis attempt was rejected.
enum class FailureStage {
  kPromptInvalid,
  kManifestInvalid,
  kFileInvalid,
  kReflectionRejected,
  kDynamicTestFailed,
};

std::string_view to_string(FailureStage stage);
FailureStage failure_stage_from_string(std::string_view text);

inline constexpr std::string_view kDefaultRunCommand = "python3 app.py";
inline constexpr std::string_view kRewardSpecFile = "reward_spec.json";
inline constexpr std::string_view kActionsFile = "actions.json";

// The materialized result of one synthesis job.
struct EnvBundle {
  std::string task_id;
  std::string instruction;
  FileManifest manifest;
  std::map<std::string, std::string> files;
  GoldenPathScript golden_path;
  std::optional<AssertionSpec> reward_spec;
  int attempt = 1;
  bool verified = false;
  std::string provider_identity;
  std::optional<FailureStage> failure_stage;
  std::string run_command = std::string(kDefaultRunCommand);

  // Manifest and file map agree, golden path present when files exist.
  bool complete() const;
  // Stable digest over task id, attempt and file contents.
  std::string content_key() const;
  // Parses actions.json from the file map, if present.
  std::optional<std::vector<EnvAction>> action_catalog() const;
};

// <bundles_dir>/<task_id>/attempt_<n>/
std::filesystem::path bundle_dir(const std::filesystem::path& bundles_dir,
                                 const std::string& task_id, int attempt);

// Writes manifest.json, files/..., golden_path.json, meta.json. Each file is
// written to a temporary name and renamed into place.
void write_bundle(const std::filesystem::path& dir, const EnvBundle& bundle);

// Loads a bundle from an attempt directory, or from a task directory, in
// which case the highest attempt is used. Throws ParseError on a missing or
// malformed bundle.
EnvBundle load_bundle(const std::filesystem::path& path);

// Every attempt directory under bundles_dir, final attempt per task.
std::vector<std::filesystem::path> list_bundles(
    const std::filesystem::path& bundles_dir);

}  // namespace envforge
