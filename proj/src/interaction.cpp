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

#include "envforge/interaction.hpp"

#include "envforge/error.hpp"
#include "envforge/http.hpp"
#include "envforge/util.hpp"

namespace envforge {

nlohmann::json to_json(const Observation& obs) {
  return {{"status", obs.status},
          {"status_class", obs.status_class},
          {"body_digest", obs.body_digest},
          {"body_excerpt", obs.body_excerpt},
          {"url", obs.url},
          {"client_side", obs.client_side}};
}

StepResult Session::step(EnvPool& pool, const EnvHandle& handle,
                         const EnvAction& action) {
  action.validate();
  if (action.kind == EnvActionKind::kStop)
    throw ContractError("stop is not executable");

  StepResult result;
  if (action.kind == EnvActionKind::kTypeText) {
    typed_.emplace_back(action.target, *action.payload);
    result.observation.client_side = true;
    result.observation.status_class = "none";
    result.observation.url = last_url_;
    result.events = pool.drain_events(handle);
    return result;
  }

  HttpRequest req;
  req.url = handle.base_url() + action.target;
  req.timeout = action_timeout_;
  if (action.kind == EnvActionKind::kNavigate) {
    req.method = "GET";
  } else {
    req.method = "POST";
    std::string body;
    if (action.kind == EnvActionKind::kSubmit) {
      for (const auto& [field, text] : typed_) {
        if (!body.empty()) body += '&';
        body += url_encode(field) + "=" + url_encode(text);
      }
      typed_.clear();
      if (action.payload && !action.payload->empty()) {
        if (!body.empty()) body += '&';
        body += *action.payload;
      }
    }
    req.body = std::move(body);
  }

  HttpResponse resp = http_send(req);
  Observation& obs = result.observation;
  obs.status = resp.status;
  obs.status_class = status_class(resp.status);
  obs.body_digest = hex64(fnv1a(resp.body));
  obs.body_excerpt = resp.body.substr(0, excerpt_cap_);
  obs.url = handle.base_url() + resp.final_path;
  last_url_ = obs.url;
  result.events = pool.drain_events(handle);
  return result;
}

}  // namespace envforge
