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

#include "testing.hpp"

#include <signal.h>
#include <sys/wait.h>

#include <cerrno>

#include "envforge/error.hpp"

namespace envforge::testing {

std::filesystem::path fixture(const std::string& relative) {
  return std::filesystem::path(ENVFORGE_FIXTURES) / relative;
}

EnvBundle reference_bundle(const std::string& name) {
  return load_bundle(fixture("bundles/" + name));
}

PoolConfig pool_config(std::uint16_t port_lo, std::size_t max_live) {
  PoolConfig c;
  c.max_live = max_live;
  c.port_lo = port_lo;
  c.port_hi = static_cast<std::uint16_t>(port_lo + 199);
  return c;
}

bool process_alive(int pid) {
  if (pid <= 0) return false;
  // Reap if it is our zombie; a zombie no longer counts as running.
  int status = 0;
  if (waitpid(pid, &status, WNOHANG) == pid) return false;
  return kill(pid, 0) == 0 || errno == EPERM;
}

void CannedProvider::on(PromptStage stage, std::vector<std::string> answers) {
  std::lock_guard lock(mu_);
  queues_[stage] = std::move(answers);
}

void CannedProvider::on(PromptStage stage,
                        std::function<std::string(const PromptRequest&)> fn) {
  std::lock_guard lock(mu_);
  fns_[stage] = std::move(fn);
}

PromptResponse CannedProvider::complete(const PromptRequest& request) {
  std::function<std::string(const PromptRequest&)> fn;
  std::string text;
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
    if (auto f = fns_.find(request.stage); f != fns_.end()) {
      fn = f->second;
    } else {
      auto q = queues_.find(request.stage);
      if (q == queues_.end() || q->second.empty())
        throw ProviderUnavailable("no canned answer for stage");
      std::size_t& n = served_[request.stage];
      text = q->second[std::min(n, q->second.size() - 1)];
      ++n;
    }
  }
  if (fn) return {fn(request)};
  return {text};
}

std::vector<PromptRequest> CannedProvider::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::size_t CannedProvider::calls(PromptStage stage) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& r : requests_) n += r.stage == stage;
  return n;
}

}  // namespace envforge::testing
