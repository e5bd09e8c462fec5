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

#include "envforge/envpool.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <thread>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "envforge/error.hpp"
#include "envforge/http.hpp"

extern char** environ;

namespace envforge {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kStderrCap = 64 * 1024;
constexpr auto kTermGrace = std::chrono::milliseconds(2000);
constexpr auto kReaderLinger = std::chrono::milliseconds(500);

std::atomic<unsigned> g_pool_counter{0};

bool port_bindable(std::uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return false;
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  const bool ok = ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0;
  ::close(fd);
  return ok;
}

void set_nonblocking(int fd) {
  int flags = ::fcntl(fd, F_GETFL);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

}  // namespace

namespace detail {

struct Instance {
  std::uint64_t id = 0;
  std::shared_ptr<const EnvBundle> bundle;
  std::string key;
  fs::path workdir;
  std::string host;

  std::atomic<HandleState> state{HandleState::kStarting};
  std::atomic<std::uint16_t> port{0};
  std::atomic<int> pid{-1};
  bool reaped = false;
  // Set while release() restarts the process.
  bool busy = false;

  // Serializes launch / terminate of this slot.
  std::mutex life_mu;

  // Capture state.
  mutable std::mutex io_mu;
  int out_fd = -1;
  int err_fd = -1;
  bool out_eof = false;
  bool err_eof = false;
  std::string out_partial;
  std::vector<std::string> out_lines;
  std::size_t cursor = 0;
  std::string err_text;
  std::unique_ptr<RewardStreamParser> parser;
  std::thread reader;
  std::atomic<bool> stop_reader{false};

  // Reads whatever is available on fd without blocking. io_mu held.
  void pump_locked(int& fd, bool& eof, bool is_stdout) {
    if (fd < 0 || eof) return;
    char buf[4096];
    for (;;) {
      ssize_t n = ::read(fd, buf, sizeof buf);
      if (n > 0) {
        if (is_stdout) {
          append_stdout(std::string_view(buf, static_cast<std::size_t>(n)));
        } else if (err_text.size() < kStderrCap) {
          err_text.append(buf, static_cast<std::size_t>(n));
        }
        continue;
      }
      if (n == 0) {
        eof = true;
        return;
      }
      if (errno == EINTR) continue;
      return;  // EAGAIN or a hard error
    }
  }

  void append_stdout(std::string_view data) {
    out_partial.append(data);
    std::size_t start = 0;
    for (;;) {
      auto nl = out_partial.find('\n', start);
      if (nl == std::string::npos) break;
      std::string line = out_partial.substr(start, nl - start);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      out_lines.push_back(std::move(line));
      start = nl + 1;
    }
    out_partial.erase(0, start);
  }

  void pump_all_locked() {
    pump_locked(out_fd, out_eof, true);
    pump_locked(err_fd, err_eof, false);
  }

  RewardStream parse_pending_locked() {
    for (; cursor < out_lines.size(); ++cursor) parser->feed(out_lines[cursor]);
    return parser->take();
  }

  void reader_loop() {
    std::optional<Clock::time_point> stop_seen;
    for (;;) {
      pollfd fds[2];
      int n = 0;
      {
        std::lock_guard lk(io_mu);
        if (out_fd >= 0 && !out_eof) fds[n++] = {out_fd, POLLIN, 0};
        if (err_fd >= 0 && !err_eof) fds[n++] = {err_fd, POLLIN, 0};
      }
      if (n == 0) return;
      if (stop_reader.load()) {
        if (!stop_seen) stop_seen = Clock::now();
        if (Clock::now() - *stop_seen > kReaderLinger) return;
      }
      int rc = ::poll(fds, static_cast<nfds_t>(n), 50);
      if (rc > 0) {
        std::lock_guard lk(io_mu);
        pump_all_locked();
      }
    }
  }

  std::string output_text() const {
    std::lock_guard lk(io_mu);
    std::string out;
    for (const auto& l : out_lines) out += l + "\n";
    out += out_partial;
    if (!err_text.empty()) out += err_text;
    return out;
  }
};

}  // namespace detail

std::string_view to_string(HandleState state) {
  switch (state) {
    case HandleState::kStarting:
      return "starting";
    case HandleState::kReady:
      return "ready";
    case HandleState::kLeased:
      return "leased";
    case HandleState::kStopped:
      return "stopped";
    case HandleState::kFailed:
      return "failed";
  }
  return "unknown";
}

void PoolConfig::validate() const {
  if (max_live < 1) throw ContractError("max_live must be positive");
  if (port_lo == 0 || port_hi < port_lo)
    throw ContractError("port range must satisfy 0 < lo <= hi");
  if (static_cast<std::size_t>(port_hi - port_lo) + 1 < max_live)
    throw ContractError("port range smaller than max_live");
  if (health_path.empty() || health_path.front() != '/')
    throw ContractError("health_path must start with '/'");
}

std::uint64_t EnvHandle::id() const { return inst_ ? inst_->id : 0; }

std::uint16_t EnvHandle::port() const { return inst_ ? inst_->port.load() : 0; }

std::string EnvHandle::base_url() const {
  if (!inst_) return {};
  return "http://" + inst_->host + ":" + std::to_string(inst_->port.load());
}

int EnvHandle::pid() const { return inst_ ? inst_->pid.load() : -1; }

HandleState EnvHandle::state() const {
  return inst_ ? inst_->state.load() : HandleState::kStopped;
}

std::string EnvHandle::captured_output() const {
  return inst_ ? inst_->output_text() : std::string();
}

EnvPool::EnvPool(PoolConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.work_root.empty()) {
    work_root_ = fs::temp_directory_path() /
                 ("envforge-pool-" + std::to_string(::getpid()) + "-" +
                  std::to_string(g_pool_counter++));
    owns_work_root_ = true;
  } else {
    work_root_ = config_.work_root;
  }
  fs::create_directories(work_root_);
  // Rotate through the range from a per-process offset so concurrently
  // running pools rarely probe the same ports first.
  const std::size_t span = static_cast<std::size_t>(config_.port_hi - config_.port_lo) + 1;
  port_cursor_ = static_cast<std::uint16_t>((static_cast<std::size_t>(::getpid()) * 7) % span);
}

EnvPool::~EnvPool() {
  shutdown();
  if (owns_work_root_) {
    std::error_code ec;
    fs::remove_all(work_root_, ec);
  }
}

std::size_t EnvPool::live_count_locked() const { return live_.size(); }

std::size_t EnvPool::live_count() const {
  std::lock_guard lk(mu_);
  return live_count_locked();
}

std::set<std::uint16_t> EnvPool::ports_in_use() const {
  std::lock_guard lk(mu_);
  return ports_;
}

std::uint16_t EnvPool::allocate_port_locked() {
  const std::size_t span = static_cast<std::size_t>(config_.port_hi - config_.port_lo) + 1;
  for (std::size_t tried = 0; tried < span; ++tried) {
    const auto port = static_cast<std::uint16_t>(config_.port_lo + port_cursor_);
    port_cursor_ = static_cast<std::uint16_t>((port_cursor_ + 1) % span);
    if (ports_.count(port) || !port_bindable(port)) continue;
    ports_.insert(port);
    return port;
  }
  throw CapacityError("no free port in [" + std::to_string(config_.port_lo) + ", " +
                      std::to_string(config_.port_hi) + "]");
}

void EnvPool::release_port_locked(std::uint16_t port) { ports_.erase(port); }

std::shared_ptr<detail::Instance> EnvPool::new_instance_locked(const EnvBundle& bundle) {
  auto inst = std::make_shared<detail::Instance>();
  inst->id = next_id_++;
  inst->bundle = std::make_shared<const EnvBundle>(bundle);
  inst->key = bundle.content_key();
  inst->host = config_.host;
  inst->workdir = work_root_ / ("h" + std::to_string(inst->id));
  inst->port = allocate_port_locked();
  live_.push_back(inst);
  return inst;
}

void EnvPool::remove_locked(const std::shared_ptr<detail::Instance>& inst) {
  auto it = std::find(live_.begin(), live_.end(), inst);
  if (it == live_.end()) return;
  live_.erase(it);
  release_port_locked(inst->port.load());
  cv_.notify_all();
}

std::shared_ptr<detail::Instance> EnvPool::checked(const EnvHandle& handle) const {
  if (!handle.inst_) throw ContractError("empty environment handle");
  return handle.inst_;
}

bool EnvPool::launch(detail::Instance& inst) {
  const EnvBundle& bundle = *inst.bundle;

  std::error_code ec;
  fs::remove_all(inst.workdir, ec);
  fs::create_directories(inst.workdir);
  for (const auto& [path, content] : bundle.files) {
    const fs::path target = inst.workdir / path;
    fs::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }

  int out_pipe[2];
  int err_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw Error("pipe2 failed");
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    throw Error("pipe2 failed");
  }

  {
    std::lock_guard lk(inst.io_mu);
    inst.out_fd = out_pipe[0];
    inst.err_fd = err_pipe[0];
    inst.out_eof = inst.err_eof = false;
    inst.out_partial.clear();
    inst.out_lines.clear();
    inst.cursor = 0;
    inst.err_text.clear();
    inst.parser = std::make_unique<RewardStreamParser>(config_.parse_mode);
    set_nonblocking(inst.out_fd);
    set_nonblocking(inst.err_fd);
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], 1);
  posix_spawn_file_actions_adddup2(&actions, err_pipe[1], 2);
  const std::string workdir = inst.workdir.string();
  posix_spawn_file_actions_addchdir_np(&actions, workdir.c_str());

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t empty_mask;
  sigemptyset(&empty_mask);
  sigset_t default_sigs;
  sigemptyset(&default_sigs);
  sigaddset(&default_sigs, SIGPIPE);
  sigaddset(&default_sigs, SIGTERM);
  sigaddset(&default_sigs, SIGINT);
  posix_spawnattr_setsigmask(&attr, &empty_mask);
  posix_spawnattr_setsigdefault(&attr, &default_sigs);
  posix_spawnattr_setpgroup(&attr, 0);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGMASK |
                                      POSIX_SPAWN_SETSIGDEF);

  std::vector<std::string> env_strings;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    if (kv.starts_with("PORT=") || kv.starts_with("PYTHONUNBUFFERED=")) continue;
    env_strings.emplace_back(kv);
  }
  env_strings.push_back("PORT=" + std::to_string(inst.port.load()));
  env_strings.push_back("PYTHONUNBUFFERED=1");
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);

  std::string shell = "/bin/sh";
  std::string dash_c = "-c";
  std::string command = "exec " + bundle.run_command;
  char* argv[] = {shell.data(), dash_c.data(), command.data(), nullptr};

  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, shell.c_str(), &actions, &attr, argv, envp.data());
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);

  if (rc != 0) {
    std::lock_guard lk(inst.io_mu);
    inst.err_text += std::string("posix_spawn failed: ") + std::strerror(rc) + "\n";
    ::close(inst.out_fd);
    ::close(inst.err_fd);
    inst.out_fd = inst.err_fd = -1;
    return false;
  }
  inst.pid = pid;
  inst.reaped = false;
  inst.stop_reader = false;
  inst.reader = std::thread([&inst] { inst.reader_loop(); });

  // Health check.
  const auto deadline = Clock::now() + config_.spawn_timeout;
  const std::string url = "http://" + inst.host + ":" +
                          std::to_string(inst.port.load()) + config_.health_path;
  while (Clock::now() < deadline) {
    int status = 0;
    if (::waitpid(pid, &status, WNOHANG) == pid) {
      inst.reaped = true;
      return false;
    }
    try {
      HttpRequest req;
      req.url = url;
      req.timeout = std::chrono::milliseconds(1000);
      req.follow_redirects = false;
      if (http_send(req).status < 500) return true;
    } catch (const TransportError&) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(15));
  }
  return false;
}

RewardStream EnvPool::terminate(detail::Instance& inst) {
  const int pid = inst.pid.load();
  if (pid > 0) {
    ::kill(-pid, SIGTERM);
    if (!inst.reaped) {
      const auto deadline = Clock::now() + kTermGrace;
      int status = 0;
      while (Clock::now() < deadline) {
        pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r == pid || (r < 0 && errno == ECHILD)) {
          inst.reaped = true;
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
      if (!inst.reaped) {
        ::kill(-pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        inst.reaped = true;
      }
    }
    // Take down anything left in the process group.
    ::kill(-pid, SIGKILL);
  }
  inst.stop_reader = true;
  if (inst.reader.joinable()) inst.reader.join();

  RewardStream trailing;
  {
    std::lock_guard lk(inst.io_mu);
    inst.pump_all_locked();
    if (!inst.out_partial.empty()) {
      inst.out_lines.push_back(std::move(inst.out_partial));
      inst.out_partial.clear();
    }
    if (inst.parser) trailing = inst.parse_pending_locked();
    if (inst.out_fd >= 0) ::close(inst.out_fd);
    if (inst.err_fd >= 0) ::close(inst.err_fd);
    inst.out_fd = inst.err_fd = -1;
  }
  inst.pid = -1;
  std::error_code ec;
  fs::remove_all(inst.workdir, ec);
  return trailing;
}

EnvHandle EnvPool::spawn(const EnvBundle& bundle) {
  std::shared_ptr<detail::Instance> inst;
  {
    std::lock_guard lk(mu_);
    if (live_count_locked() >= config_.max_live)
      throw CapacityError("pool at capacity (" + std::to_string(config_.max_live) +
                          " live handles)");
    inst = new_instance_locked(bundle);
  }
  std::unique_lock life(inst->life_mu);
  const bool ok = launch(*inst);
  if (!ok) terminate(*inst);
  life.unlock();
  std::lock_guard lk(mu_);
  if (!ok) {
    inst->state = HandleState::kFailed;
    remove_locked(inst);
  } else if (inst->state != HandleState::kStopped) {
    inst->state = HandleState::kReady;
  }
  return EnvHandle(inst);
}

RewardStream EnvPool::drain_events(const EnvHandle& handle) {
  auto inst = checked(handle);
  const auto state = inst->state.load();
  if (state == HandleState::kStopped || state == HandleState::kFailed)
    throw StaleHandleError("environment handle " + std::to_string(inst->id) + " is " +
                           std::string(to_string(state)));
  std::lock_guard lk(inst->io_mu);
  if (!inst->parser) return {};
  inst->pump_all_locked();
  return inst->parse_pending_locked();
}

EnvHandle EnvPool::lease(const EnvBundle& bundle,
                         std::optional<std::chrono::milliseconds> timeout) {
  const std::string key = bundle.content_key();
  const auto deadline = Clock::now() + timeout.value_or(config_.lease_timeout);
  std::unique_lock lk(mu_);
  for (;;) {
    for (auto& inst : live_) {
      if (inst->key == key && inst->state == HandleState::kReady && !inst->busy) {
        inst->state = HandleState::kLeased;
        return EnvHandle(inst);
      }
    }
    if (live_count_locked() < config_.max_live) {
      auto inst = new_instance_locked(bundle);
      inst->busy = true;
      lk.unlock();
      bool ok = false;
      {
        std::lock_guard life(inst->life_mu);
        ok = launch(*inst);
        if (!ok) terminate(*inst);
      }
      lk.lock();
      inst->busy = false;
      if (!ok) {
        inst->state = HandleState::kFailed;
        remove_locked(inst);
        throw SpawnError("environment for task '" + bundle.task_id + "' failed to start",
                         inst->output_text());
      }
      if (inst->state == HandleState::kStopped) continue;  // shut down meanwhile
      inst->state = HandleState::kLeased;
      return EnvHandle(inst);
    }
    // Evict an idle handle that serves another bundle.
    auto victim = std::find_if(live_.begin(), live_.end(), [&](const auto& inst) {
      return inst->key != key && inst->state == HandleState::kReady && !inst->busy;
    });
    if (victim != live_.end()) {
      auto inst = *victim;
      inst->state = HandleState::kStopped;
      lk.unlock();
      {
        std::lock_guard life(inst->life_mu);
        terminate(*inst);
      }
      lk.lock();
      remove_locked(inst);
      continue;
    }
    if (cv_.wait_until(lk, deadline) == std::cv_status::timeout &&
        Clock::now() >= deadline)
      throw TimeoutError("timed out waiting for an environment slot");
  }
}

RewardStream EnvPool::release(const EnvHandle& handle) {
  auto inst = checked(handle);
  {
    std::lock_guard lk(mu_);
    if (inst->state != HandleState::kLeased || inst->busy)
      throw ContractError("release of environment handle " + std::to_string(inst->id) +
                          " that is not leased");
    inst->busy = true;
  }

  std::lock_guard life(inst->life_mu);
  RewardStream trailing = terminate(*inst);
  bool ok = false;
  {
    std::lock_guard lk(mu_);
    if (inst->state == HandleState::kStopped) {
      inst->busy = false;
      return trailing;
    }
    release_port_locked(inst->port.load());
    try {
      inst->port = allocate_port_locked();
    } catch (const CapacityError&) {
      inst->busy = false;
      inst->state = HandleState::kFailed;
      live_.erase(std::remove(live_.begin(), live_.end(), inst), live_.end());
      cv_.notify_all();
      throw;
    }
  }
  ok = launch(*inst);
  if (!ok) terminate(*inst);

  std::lock_guard lk(mu_);
  inst->busy = false;
  if (inst->state == HandleState::kStopped) {
    cv_.notify_all();
    return trailing;
  }
  if (!ok) {
    inst->state = HandleState::kFailed;
    remove_locked(inst);
    throw SpawnError("environment restart failed", inst->output_text());
  }
  inst->state = HandleState::kReady;
  cv_.notify_all();
  return trailing;
}

RewardStream EnvPool::stop(const EnvHandle& handle) {
  auto inst = checked(handle);
  {
    std::lock_guard lk(mu_);
    const auto state = inst->state.load();
    if (state == HandleState::kStopped || state == HandleState::kFailed) return {};
    inst->state = HandleState::kStopped;
  }
  RewardStream trailing;
  {
    std::lock_guard life(inst->life_mu);
    trailing = terminate(*inst);
  }
  std::lock_guard lk(mu_);
  remove_locked(inst);
  return trailing;
}

void EnvPool::shutdown() {
  std::vector<std::shared_ptr<detail::Instance>> victims;
  {
    std::lock_guard lk(mu_);
    for (auto& inst : live_) {
      if (inst->state != HandleState::kStopped) {
        inst->state = HandleState::kStopped;
        victims.push_back(inst);
      }
    }
  }
  for (auto& inst : victims) {
    {
      std::lock_guard life(inst->life_mu);
      terminate(*inst);
    }
    std::lock_guard lk(mu_);
    remove_locked(inst);
  }
}

}  // namespace envforge
