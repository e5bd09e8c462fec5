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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <utility>
#include <vector>

#include "envforge/analytics.hpp"
#include "envforge/error.hpp"
#include "envforge/reward.hpp"
#include "envforge/rollout.hpp"
#include "envforge/training.hpp"

namespace py = pybind11;
using namespace envforge;

namespace {

// Reports cross the boundary as JSON text; the package decodes them.
std::string dumps(const nlohmann::json& j) { return j.dump(); }

py::dict stream_dict(const RewardStream& s) {
  py::list events, malformed, warnings;
  for (const auto& e : s.events) {
    py::dict d;
    d["seq"] = e.seq;
    d["explanation"] = e.explanation ? py::object(py::str(*e.explanation)) : py::none();
    d["reward"] = e.reward;
    d["next"] = e.next_hint;
    events.append(d);
  }
  for (const auto& m : s.malformed) malformed.append(py::make_tuple(m.line_no, m.raw));
  for (const auto& w : s.warnings) warnings.append(py::make_tuple(w.line_no, w.message));
  py::dict out;
  out["events"] = events;
  out["malformed"] = malformed;
  out["warnings"] = warnings;
  return out;
}

}  // namespace

PYBIND11_MODULE(_envforge, m) {
  m.doc() = "envforge core";

  static py::exception<Error> base(m, "Error");
  static py::exception<ContractError> contract(m, "ContractError", base.ptr());
  static py::exception<ParseError> parse(m, "ParseError", base.ptr());
  static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ContractError& e) {
      contract(e.what());
    } catch (const ParseError& e) {
      parse(e.what());
    } catch (const ValidationError& e) {
      validation(e.what());
    } catch (const Error& e) {
      base(e.what());
    }
  });

  m.def(
      "weighted_reward",
      [](const std::vector<std::pair<std::string, double>>& weights,
         const std::vector<std::string>& satisfied) {
        std::vector<Assertion> list;
        for (const auto& [id, w] : weights) list.push_back({id, w, ""});
        StateSnapshot state;
        state.satisfied.insert(satisfied.begin(), satisfied.end());
        return weighted_reward(AssertionSpec(std::move(list)), state);
      },
      py::arg("weights"), py::arg("satisfied"));

  m.def(
      "parse_reward_stream",
      [](const std::vector<std::string>& lines, const std::string& mode) {
        return stream_dict(parse_reward_stream(lines, parse_mode_from_string(mode)));
      },
      py::arg("lines"), py::arg("mode") = "lenient");
  m.def("format_reward_line", &format_reward_line, py::arg("reward"), py::arg("next_hint"));
  m.def("classify_success", &classify_success, py::arg("reward"));

  m.def(
      "grpo_advantages",
      [](const std::vector<double>& rewards) { return grpo_advantages(rewards); },
      py::arg("rewards"));
  m.def(
      "policy_gradient",
      [](const std::vector<double>& theta, const std::vector<std::vector<std::size_t>>& episodes,
         const std::vector<double>& advantages) {
        return policy_gradient(theta, episodes, advantages);
      },
      py::arg("theta"), py::arg("episodes"), py::arg("advantages"));
  m.def(
      "advantage_weighted_log_likelihood",
      [](const std::vector<double>& theta, const std::vector<std::vector<std::size_t>>& episodes,
         const std::vector<double>& advantages) {
        return advantage_weighted_log_likelihood(theta, episodes, advantages);
      },
      py::arg("theta"), py::arg("episodes"), py::arg("advantages"));

  m.def(
      "_epoch_cost",
      [](long long n_envs, long long rollouts, const std::string& regime) {
        return dumps(to_json(epoch_cost(CostModel{}, n_envs, rollouts, regime_from_string(regime))));
      },
      py::arg("n_envs"), py::arg("rollouts_per_env"), py::arg("regime") = "real");
  m.def(
      "concurrent_device_cost",
      [](long long n, double hours) { return concurrent_device_cost(CostModel{}, n, hours); },
      py::arg("n_devices"), py::arg("hours"));
  m.def(
      "_reward_alignment",
      [](const std::vector<std::pair<int, double>>& records) {
        std::vector<AlignmentRecord> recs;
        for (const auto& [label, reward] : records) recs.push_back({label, reward});
        return dumps(to_json(reward_alignment(recs)));
      },
      py::arg("records"));
  m.def(
      "_length_distribution",
      [](const std::vector<std::size_t>& lengths, std::size_t clip) {
        return dumps(to_json(length_distribution(std::span<const std::size_t>(lengths), clip)));
      },
      py::arg("lengths"), py::arg("clip") = 20);
}
