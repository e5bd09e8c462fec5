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

#include <doctest.h>

#include <atomic>
#include <chrono>
#include <future>
#include <map>
#include <mutex>
#include <thread>

#include "envforge/envpool.hpp"
#include "envforge/error.hpp"
#include "envforge/http.hpp"
#include "testing.hpp"

using namespace envforge;
using namespace std::chrono_literals;

namespace {

constexpr std::uint16_t kPorts = 21000;

HttpResponse get(const EnvHandle& h, const std::string& path) {
  HttpRequest req;
  req.url = h.base_url() + path;
  return http_send(req);
}

}  // namespace

TEST_CASE("config validation") {
  PoolConfig c = testing::pool_config(kPorts);
  c.max_live = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = testing::pool_config(kPorts);
  c.port_hi = c.port_lo + 1;
  c.max_live = 3;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = testing::pool_config(kPorts);
  c.health_path = "health";
  CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("spawn serves the reference environment") {
  EnvPool pool(testing::pool_config(kPorts));
  const EnvBundle weather = testing::reference_bundle("weather");
  EnvHandle h = pool.spawn(weather);
  CHECK(h.state() == HandleState::kReady);
  CHECK(h.port() >= kPorts);
  CHECK(testing::process_alive(h.pid()));
  CHECK(get(h, "/").status == 200);
  // Health check already loaded the home page once.
  RewardStream launch = pool.drain_events(h);
  REQUIRE(launch.events.size() == 1);
  CHECK(launch.events[0].reward == 0.0);
  CHECK(launch.events[0].explanation.has_value());
  pool.shutdown();
}

TEST_CASE("broken server yields a failed handle with its output") {
  EnvPool pool(testing::pool_config(kPorts));
  EnvHandle h = pool.spawn(testing::reference_bundle("broken"));
  CHECK(h.state() == HandleState::kFailed);
  CHECK(h.captured_output().find("SyntaxError") != std::string::npos);
  CHECK(pool.live_count() == 0);
  CHECK_THROWS_AS(pool.drain_events(h), StaleHandleError);
  CHECK_THROWS_AS(pool.lease(testing::reference_bundle("broken")), SpawnError);
}

TEST_CASE("capacity is enforced") {
  EnvPool pool(testing::pool_config(kPorts, 2));
  const EnvBundle counter = testing::reference_bundle("counter");
  EnvHandle a = pool.spawn(counter);
  EnvHandle b = pool.spawn(counter);
  CHECK(a.port() != b.port());
  CHECK_THROWS_AS(pool.spawn(counter), CapacityError);
  pool.shutdown();
}

TEST_CASE("drain cursor semantics and noise") {
  EnvPool pool(testing::pool_config(kPorts));
  EnvHandle h = pool.spawn(testing::reference_bundle("counter"));
  CHECK(pool.drain_events(h).empty());
  get(h, "/emit?n=1");
  RewardStream s = pool.drain_events(h);
  REQUIRE(s.events.size() == 1);
  CHECK(s.events[0].explanation == std::optional<std::string>("event 1"));
  CHECK(pool.drain_events(h).empty());

  get(h, "/emit?n=3&noise=1");
  s = pool.drain_events(h);
  CHECK(s.events.size() == 3);
  CHECK(s.malformed.empty());
  CHECK(s.events.back().next_hint == "seq-4");
  pool.shutdown();
}

TEST_CASE("trailing lines are drained at process exit") {
  EnvPool pool(testing::pool_config(kPorts));
  EnvHandle h = pool.lease(testing::reference_bundle("counter"));
  get(h, "/emit?n=2");
  CHECK(pool.drain_events(h).events.size() == 2);
  get(h, "/exit");
  std::this_thread::sleep_for(100ms);
  RewardStream trailing = pool.release(h);
  REQUIRE(trailing.events.size() == 1);
  CHECK(trailing.events[0].next_hint == "seq-final");
  pool.shutdown();
}

TEST_CASE("release restarts from initial state") {
  EnvPool pool(testing::pool_config(kPorts));
  const EnvBundle counter = testing::reference_bundle("counter");
  EnvHandle h = pool.lease(counter);
  get(h, "/emit?n=2");
  CHECK(pool.drain_events(h).events.back().next_hint == "seq-2");
  const int first_pid = h.pid();
  pool.release(h);
  CHECK(h.state() == HandleState::kReady);
  CHECK(h.pid() != first_pid);
  CHECK_FALSE(testing::process_alive(first_pid));

  EnvHandle again = pool.lease(counter);
  CHECK(again == h);
  get(again, "/emit?n=1");
  CHECK(pool.drain_events(again).events[0].next_hint == "seq-1");
  pool.release(again);
  CHECK_THROWS_AS(pool.release(again), ContractError);
  pool.shutdown();
}

TEST_CASE("two episodes start with the same launch event") {
  EnvPool pool(testing::pool_config(kPorts));
  const EnvBundle weather = testing::reference_bundle("weather");
  std::vector<std::string> firsts;
  for (int i = 0; i < 2; ++i) {
    EnvHandle h = pool.lease(weather);
    RewardStream s = pool.drain_events(h);
    REQUIRE(s.events.size() == 1);
    firsts.push_back(*s.events[0].explanation + "|" + s.events[0].next_hint);
    pool.release(h);
  }
  CHECK(firsts[0] == firsts[1]);
  pool.shutdown();
}

TEST_CASE("lease blocks at capacity until release") {
  EnvPool pool(testing::pool_config(kPorts, 1));
  const EnvBundle counter = testing::reference_bundle("counter");
  EnvHandle h = pool.lease(counter);
  CHECK_THROWS_AS(pool.lease(counter, 200ms), TimeoutError);

  auto waiter = std::async(std::launch::async, [&] { return pool.lease(counter, 20s); });
  CHECK(waiter.wait_for(300ms) == std::future_status::timeout);
  pool.release(h);
  EnvHandle second = waiter.get();
  CHECK(second.state() == HandleState::kLeased);
  pool.shutdown();
}

TEST_CASE("leases are exclusive") {
  EnvPool pool(testing::pool_config(kPorts, 3));
  const EnvBundle counter = testing::reference_bundle("counter");
  std::atomic<int> in_use{0};
  std::atomic<bool> overlap{false};
  std::vector<std::thread> threads;
  std::map<std::uint64_t, std::atomic<int>> owners;
  std::mutex owners_mu;
  for (int t = 0; t < 6; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 3; ++i) {
        EnvHandle h = pool.lease(counter, 60s);
        std::atomic<int>* slot;
        {
          std::lock_guard lk(owners_mu);
          slot = &owners[h.id()];
        }
        if (slot->fetch_add(1) != 0) overlap = true;
        ++in_use;
        std::this_thread::sleep_for(20ms);
        slot->fetch_sub(1);
        --in_use;
        pool.release(h);
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK_FALSE(overlap.load());
  CHECK(pool.live_count() <= 3);
  pool.shutdown();
}

TEST_CASE("shutdown stops every child and is idempotent") {
  EnvPool pool(testing::pool_config(kPorts));
  const EnvBundle counter = testing::reference_bundle("counter");
  std::vector<int> pids;
  for (int i = 0; i < 3; ++i) pids.push_back(pool.spawn(counter).pid());
  CHECK(pool.live_count() == 3);
  pool.shutdown();
  CHECK(pool.live_count() == 0);
  CHECK(pool.ports_in_use().empty());
  for (int pid : pids) CHECK_FALSE(testing::process_alive(pid));
  CHECK_NOTHROW(pool.shutdown());
}

TEST_CASE("stop returns trailing events and frees the port") {
  EnvPool pool(testing::pool_config(kPorts));
  EnvHandle h = pool.spawn(testing::reference_bundle("counter"));
  const auto port = h.port();
  get(h, "/emit?n=2");
  RewardStream trailing = pool.stop(h);
  CHECK(trailing.events.size() == 2);
  CHECK(h.state() == HandleState::kStopped);
  CHECK(pool.ports_in_use().count(port) == 0);
  CHECK_THROWS_AS(pool.drain_events(h), StaleHandleError);
}
