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

#include "envforge/bundle.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "envforge/error.hpp"
#include "envforge/util.hpp"

namespace envforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view basename(std::string_view path) {
  auto slash = path.rfind('/');
  return slash == std::string_view::npos ? path : path.substr(slash + 1);
}

std::string extension(std::string_view path) {
  auto base = basename(path);
  auto dot = base.rfind('.');
  if (dot == std::string_view::npos || dot == 0) return {};
  return to_lower(base.substr(dot));
}

std::string_view stem(std::string_view path) {
  auto base = basename(path);
  auto dot = base.rfind('.');
  return dot == std::string_view::npos || dot == 0 ? base : base.substr(0, dot);
}

}  // namespace

void FileManifest::check_path(std::string_view path) {
  if (path.empty()) throw ValidationError("manifest path is empty");
  if (path.front() == '/' || path.find('\\') != std::string_view::npos ||
      path.find(':') != std::string_view::npos)
    throw ValidationError("manifest path must be relative: " + std::string(path));
  std::size_t start = 0;
  while (start <= path.size()) {
    auto end = path.find('/', start);
    if (end == std::string_view::npos) end = path.size();
    auto segment = path.substr(start, end - start);
    if (segment.empty() || segment == "." || segment == "..")
      throw ValidationError("manifest path not normalized: " + std::string(path));
    start = end + 1;
  }
}

bool FileManifest::is_image_path(std::string_view path) {
  static constexpr std::array<std::string_view, 10> kImage = {
      ".png", ".jpg", ".jpeg", ".gif", ".bmp",
      ".webp", ".ico", ".svg", ".tif", ".tiff"};
  auto ext = extension(path);
  return std::find(kImage.begin(), kImage.end(), ext) != kImage.end();
}

bool FileManifest::is_server_path(std::string_view path) {
  static constexpr std::array<std::string_view, 5> kStems = {
      "app", "server", "main", "app_server", "wsgi"};
  static constexpr std::array<std::string_view, 8> kExt = {
      "", ".py", ".js", ".mjs", ".ts", ".go", ".rb", ".php"};
  return std::find(kStems.begin(), kStems.end(), stem(path)) != kStems.end() &&
         std::find(kExt.begin(), kExt.end(), extension(path)) != kExt.end();
}

bool FileManifest::is_page_path(std::string_view path) {
  auto ext = extension(path);
  return path.starts_with("templates/") || ext == ".html" || ext == ".htm" ||
         ext == ".j2" || ext == ".jinja";
}

FileManifest::FileManifest(std::vector<std::string> entries)
    : entries_(std::move(entries)) {
  std::set<std::string_view> seen;
  bool server = false;
  bool page = false;
  for (const auto& p : entries_) {
    check_path(p);
    if (is_image_path(p))
      throw ValidationError("manifest must not contain image assets: " + p);
    if (!seen.insert(p).second)
      throw ValidationError("duplicate manifest entry: " + p);
    server = server || is_server_path(p);
    page = page || is_page_path(p);
  }
  if (!server) throw ValidationError("manifest has no server entry");
  if (!page) throw ValidationError("manifest has no page template entry");
}

bool FileManifest::contains(std::string_view path) const {
  return std::find(entries_.begin(), entries_.end(), path) != entries_.end();
}

const std::string& FileManifest::server_entry() const {
  for (const auto& p : entries_)
    if (is_server_path(p)) return p;
  throw ContractError("manifest has no server entry");
}

void GoldenPathScript::validate() const {
  if (steps.empty()) throw ValidationError("golden path is empty");
  double prev = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double e = steps[i].expect_reward_at_least;
    if (!(e >= 0.0 && e <= 1.0))
      throw ValidationError("golden path milestone " + std::to_string(i) +
                            " outside [0, 1]");
    if (e < prev)
      throw ValidationError("golden path milestones decrease at step " +
                            std::to_string(i));
    prev = e;
    try {
      steps[i].action.validate();
    } catch (const ContractError& err) {
      throw ValidationError(std::string("golden path step ") +
                            std::to_string(i) + ": " + err.what());
    }
    if (steps[i].action.kind == EnvActionKind::kStop)
      throw ValidationError("golden path must not contain stop actions");
  }
  if (prev < 1.0 - kRewardEpsilon)
    throw ValidationError("golden path final milestone below 1.0");
}

json to_json(const GoldenPathScript& script) {
  json steps = json::array();
  for (const auto& s : script.steps)
    steps.push_back({{"action", to_json(s.action)},
                     {"expect_reward_at_least", s.expect_reward_at_least}});
  return {{"steps", steps}};
}

GoldenPathScript golden_path_from_json(const json& j) {
  try {
    GoldenPathScript script;
    for (const auto& s : j.at("steps"))
      script.steps.push_back({env_action_from_json(s.at("action")),
                              s.at("expect_reward_at_least").get<double>()});
    return script;
  } catch (const json::exception& e) {
    throw ParseError(std::string("golden path: ") + e.what());
  }
}

std::string_view to_string(FailureStage stage) {
  switch (stage) {
    case FailureStage::kPromptInvalid:
      return "prompt_invalid";
    case FailureStage::kManifestInvalid:
      return "manifest_invalid";
    case FailureStage::kFileInvalid:
      return "file_invalid";
    case FailureStage::kReflectionRejected:
      return "reflection_rejected";
    case FailureStage::kDynamicTestFailed:
      return "dynamic_test_failed";
  }
  return "unknown";
}

FailureStage failure_stage_from_string(std::string_view text) {
  for (auto s : {FailureStage::kPromptInvalid, FailureStage::kManifestInvalid,
                 FailureStage::kFileInvalid, FailureStage::kReflectionRejected,
                 FailureStage::kDynamicTestFailed})
    if (to_string(s) == text) return s;
  throw ParseError("unknown failure stage '" + std::string(text) + "'");
}

bool EnvBundle::complete() const {
  if (manifest.empty() || files.size() != manifest.entries().size()) return false;
  for (const auto& p : manifest.entries())
    if (!files.count(p)) return false;
  return !golden_path.steps.empty();
}

std::string EnvBundle::content_key() const {
  std::uint64_t h = fnv1a(task_id);
  h = fnv1a(std::to_string(attempt), h);
  h = fnv1a(run_command, h);
  for (const auto& [path, content] : files) {
    h = fnv1a(path, h);
    h = fnv1a(content, h);
  }
  return task_id + "#" + hex64(h);
}

std::optional<std::vector<EnvAction>> EnvBundle::action_catalog() const {
  auto it = files.find(std::string(kActionsFile));
  if (it == files.end()) return std::nullopt;
  try {
    std::vector<EnvAction> catalog;
    const json doc = json::parse(it->second);
    for (const auto& a : doc.at("actions"))
      catalog.push_back(env_action_from_json(a));
    return catalog;
  } catch (const json::exception& e) {
    throw ParseError(std::string("actions.json: ") + e.what());
  }
}

fs::path bundle_dir(const fs::path& bundles_dir, const std::string& task_id,
                    int attempt) {
  return bundles_dir / task_id / ("attempt_" + std::to_string(attempt));
}

void write_bundle(const fs::path& dir, const EnvBundle& bundle) {
  fs::create_directories(dir / "files");
  write_file_atomic(dir / "manifest.json",
                    json{{"files", bundle.manifest.entries()}}.dump(2) + "\n");
  for (const auto& [path, content] : bundle.files)
    write_file_atomic(dir / "files" / path, content);
  if (!bundle.golden_path.steps.empty())
    write_file_atomic(dir / "golden_path.json",
                      to_json(bundle.golden_path).dump(2) + "\n");
  if (bundle.reward_spec && !bundle.files.count(std::string(kRewardSpecFile)))
    write_file_atomic(dir / kRewardSpecFile,
                      to_json(*bundle.reward_spec).dump(2) + "\n");
  json meta{{"task_id", bundle.task_id},
            {"instruction", bundle.instruction},
            {"verified", bundle.verified},
            {"attempt", bundle.attempt},
            {"provider_identity", bundle.provider_identity},
            {"run", bundle.run_command}};
  meta["failure_stage"] =
      bundle.failure_stage ? json(to_string(*bundle.failure_stage)) : json();
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

namespace {

fs::path resolve_attempt_dir(const fs::path& path) {
  if (fs::exists(path / "meta.json")) return path;
  int best = 0;
  fs::path best_dir;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      auto name = entry.path().filename().string();
      if (!entry.is_directory() || !name.starts_with("attempt_")) continue;
      try {
        int n = std::stoi(name.substr(8));
        if (n > best && fs::exists(entry.path() / "meta.json")) {
          best = n;
          best_dir = entry.path();
        }
      } catch (const std::exception&) {
      }
    }
  }
  if (best == 0) throw ParseError("no bundle found at " + path.string());
  return best_dir;
}

}  // namespace

EnvBundle load_bundle(const fs::path& path) {
  const fs::path dir = resolve_attempt_dir(path);
  try {
    const json meta = json::parse(read_file(dir / "meta.json"));
    const json manifest = json::parse(read_file(dir / "manifest.json"));

    EnvBundle bundle;
    bundle.task_id = meta.at("task_id").get<std::string>();
    bundle.instruction = meta.value("instruction", std::string());
    bundle.verified = meta.value("verified", false);
    bundle.attempt = meta.value("attempt", 1);
    bundle.provider_identity = meta.value("provider_identity", std::string());
    bundle.run_command = meta.value("run", std::string(kDefaultRunCommand));
    if (auto it = meta.find("failure_stage"); it != meta.end() && !it->is_null())
      bundle.failure_stage = failure_stage_from_string(it->get<std::string>());

    auto entries = manifest.at("files").get<std::vector<std::string>>();
    if (!entries.empty()) bundle.manifest = FileManifest(entries);
    // Keep-last bundles may stop partway through file generation.
    for (const auto& p : entries)
      if (fs::exists(dir / "files" / p)) bundle.files[p] = read_file(dir / "files" / p);

    if (fs::exists(dir / "golden_path.json"))
      bundle.golden_path =
          golden_path_from_json(json::parse(read_file(dir / "golden_path.json")));

    if (auto it = bundle.files.find(std::string(kRewardSpecFile));
        it != bundle.files.end())
      bundle.reward_spec = assertion_spec_from_json(json::parse(it->second));
    else if (fs::exists(dir / kRewardSpecFile))
      bundle.reward_spec =
          assertion_spec_from_json(json::parse(read_file(dir / kRewardSpecFile)));
    return bundle;
  } catch (const json::exception& e) {
    throw ParseError("bundle " + dir.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ParseError("bundle " + dir.string() + ": " + e.what());
  }
}

std::vector<fs::path> list_bundles(const fs::path& bundles_dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(bundles_dir)) return out;
  for (const auto& entry : fs::directory_iterator(bundles_dir)) {
    if (!entry.is_directory()) continue;
    try {
      out.push_back(resolve_attempt_dir(entry.path()));
    } catch (const ParseError&) {
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace envforge
