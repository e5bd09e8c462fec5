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

#include "envforge/live_provider.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "envforge/error.hpp"
#include "envforge/http.hpp"

namespace envforge {

using nlohmann::json;

LiveProviderConfig LiveProviderConfig::from_env() {
  auto get = [](const char* name) {
    const char* v = std::getenv(name);
    return std::string(v ? v : "");
  };
  LiveProviderConfig c;
  c.url = get("PROVIDER_URL");
  c.key = get("PROVIDER_KEY");
  c.model = get("PROVIDER_MODEL");
  if (c.url.empty()) throw ContractError("PROVIDER_URL is not set");
  if (c.key.empty()) throw ContractError("PROVIDER_KEY is not set");
  return c;
}

LiveProvider::LiveProvider(LiveProviderConfig config) : config_(std::move(config)) {
  if (config_.url.empty()) throw ContractError("live provider needs an endpoint URL");
  if (config_.max_in_flight == 0) throw ContractError("max_in_flight must be positive");
}

std::string LiveProvider::identity() const {
  return "live:" + (config_.model.empty() ? std::string("default") : config_.model);
}

PromptResponse LiveProvider::complete(const PromptRequest& request) {
  json user_content;
  if (config_.multimodal && !request.attachments.empty()) {
    user_content = json::array({{{"type", "text"}, {"text", request.user}}});
    for (const auto& ref : request.attachments)
      user_content.push_back({{"type", "image_url"}, {"image_url", {{"url", ref}}}});
  } else {
    std::string text = request.user;
    for (const auto& ref : request.attachments) text += "\n[screenshot: " + ref + "]";
    user_content = text;
  }
  json body{{"messages", json::array({{{"role", "system"}, {"content", request.system}},
                                       {{"role", "user"}, {"content", user_content}}})}};
  if (!config_.model.empty()) body["model"] = config_.model;

  HttpRequest req;
  req.method = "POST";
  req.url = config_.url;
  req.body = body.dump();
  req.content_type = "application/json";
  req.timeout = config_.timeout;
  if (!config_.key.empty()) req.headers["Authorization"] = "Bearer " + config_.key;

  HttpResponse resp;
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
  }
  struct Slot {
    LiveProvider* self;
    ~Slot() {
      {
        std::lock_guard lock(self->mu_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } slot{this};
  try {
    resp = http_send(req);
  } catch (const TransportError& e) {
    throw TransientError(e.what());
  }

  if (resp.status == 429 || resp.status >= 500)
    throw TransientError("provider answered " + std::to_string(resp.status));
  if (resp.status < 200 || resp.status >= 300)
    throw ProviderUnavailable("provider answered " + std::to_string(resp.status) + ": " +
                              resp.body.substr(0, 200));
  try {
    const json j = json::parse(resp.body);
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return {content.get<std::string>()};
    std::string text;
    for (const auto& part : content)
      if (part.value("type", "") == "text") text += part.value("text", "");
    return {text};
  } catch (const json::exception& e) {
    throw TransientError(std::string("unreadable provider response: ") + e.what());
  }
}

}  // namespace envforge
