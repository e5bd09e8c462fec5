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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "envforge/bundle.hpp"
#include "envforge/reward.hpp"

namespace envforge {

struct PoolConfig {
  std::size_t max_live = 8;
  std::uint16_t port_lo = 20000;
  std::uint16_t port_hi = 20999;
  std::chrono::milliseconds spawn_timeout{10000};
  std::string health_path = "/";
  // Where bundles are materialized. Empty selects a per-process temp dir.
  std::filesystem::path work_root;
  // How long lease() waits for a free slot.
  std::chrono::milliseconds lease_timeout{60000};
  ParseMode parse_mode = ParseMode::kLenient;
  std::string host = "127.0.0.1";

  void validate() const;
};

enum class HandleState { kStarting, kReady, kLeased, kStopped, kFailed };

std::string_view to_string(HandleState state);

namespace detail {
struct Instance;
}

// Shared reference to one environment process slot. Copies refer to the
// same slot. After a release() the slot runs a fresh process, possibly on a
// different port.
class EnvHandle {
 public:
  EnvHandle() = default;

  std::uint64_t id() const;
  std::string base_url() const;
  std::uint16_t port() const;
  // Process id of the current child, -1 when none is running.
  int pid() const;
  HandleState state() const;
  // stdout and stderr captured from the current (or last) process.
  std::string captured_output() const;

  explicit operator bool() const noexcept { return inst_ != nullptr; }
  friend bool operator==(const EnvHandle& a, const EnvHandle& b) {
    return a.inst_ == b.inst_;
  }

 private:
  friend class EnvPool;
  explicit EnvHandle(std::shared_ptr<detail::Instance> inst)
      : inst_(std::move(inst)) {}
  std::shared_ptr<detail::Instance> inst_;
};

// Owns environment server processes.
//
// Each child runs `sh -c "exec <run_command>"` inside a freshly materialized
// copy of the bundle files, in its own process group, with PORT set. Its
// stdout and stderr are captured from before exec; a handle becomes ready
// once GET health_path answers with a status below 500.
//
// Thread-safe: lease/release/drain may be called from many threads.
class EnvPool {
 public:
  explicit EnvPool(PoolConfig config = {});
  ~EnvPool();

  EnvPool(const EnvPool&) = delete;
  EnvPool& operator=(const EnvPool&) = delete;

  const PoolConfig& config() const noexcept { return config_; }

  // Starts a process for bundle. Throws CapacityError when max_live handles
  // are live or no port is free. A process that never becomes healthy
  // yields a handle in the failed state with its output attached.
  EnvHandle spawn(const EnvBundle& bundle);

  // Parses every stdout line appended since the previous drain of this
  // handle. Throws StaleHandleError unless the handle is live.
  RewardStream drain_events(const EnvHandle& handle);

  // Hands out a ready handle for bundle exclusively to the caller, spawning
  // one when capacity allows and evicting idle handles of other bundles if
  // needed. Blocks until a slot frees up; throws TimeoutError after
  // lease_timeout (or the given timeout) and SpawnError if the process
  // cannot start.
  EnvHandle lease(const EnvBundle& bundle,
                  std::optional<std::chrono::milliseconds> timeout = std::nullopt);

  // Returns a leased handle. The process is restarted so the next lease
  // starts from fresh in-memory state. Returns protocol lines that were
  // still pending from the finished process. Throws ContractError when the
  // handle is not currently leased.
  RewardStream release(const EnvHandle& handle);

  // Terminates the handle's process. Returns its trailing events.
  RewardStream stop(const EnvHandle& handle);

  // Stops every live handle. Idempotent.
  void shutdown();

  std::size_t live_count() const;
  // Ports held by live handles.
  std::set<std::uint16_t> ports_in_use() const;

 private:
  std::size_t live_count_locked() const;
  std::uint16_t allocate_port_locked();
  void release_port_locked(std::uint16_t port);
  std::shared_ptr<detail::Instance> new_instance_locked(const EnvBundle& bundle);
  void remove_locked(const std::shared_ptr<detail::Instance>& inst);
  // Materializes files, starts the child and waits for health. Caller
  // holds the instance lifecycle lock. Returns false on failure.
  bool launch(detail::Instance& inst);
  RewardStream terminate(detail::Instance& inst);
  std::shared_ptr<detail::Instance> checked(const EnvHandle& handle) const;

  PoolConfig config_;
  std::filesystem::path work_root_;
  bool owns_work_root_ = false;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::shared_ptr<detail::Instance>> live_;
  std::set<std::uint16_t> ports_;
  std::uint16_t port_cursor_ = 0;
  std::uint64_t next_id_ = 1;
};

}  // namespace envforge
