#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/hooks/hooks.hpp"

namespace prism::hooks {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepExpectation {
  Action action = Action::proceed;
  std::optional<std::string> reason_code;
};

// Payload keys by hook:
//   message_received, tool_result_persist, before_message_write,
//   message_sending: {"text"}
//   before_prompt_build: {"prompt"}
//   before_tool_call: {"tool", "args"}
//   after_tool_call: {"tool", "args", "result", "scanner_annotation"?}
//   agent_spawn, session_end: {}
//   gateway_start: {"snapshot_path"?}
struct ScenarioStep {
  Hook hook = Hook::message_received;
  nlohmann::json payload = nlohmann::json::object();
  std::optional<StepExpectation> expected;
  // Simulated time that passes before the step fires.
  std::int64_t advance_ms = 0;
};

struct Scenario {
  std::string session_id;
  std::optional<std::string> conversation_id;
  std::string channel = "sim";
  std::vector<ScenarioStep> steps;
};

// Throws ScenarioError on unknown hooks, malformed payloads or steps that
// break lifecycle order within a turn. A turn starts at message_received;
// inside it hooks must not move backwards through
// ingress -> pre-exec -> post-exec -> outbound.
Scenario parse_scenario(const nlohmann::json& j);
void validate_phase_order(const std::vector<ScenarioStep>& steps);

struct StepResult {
  Hook hook;
  HookOutcome outcome;
  bool expectation_met = true;
};

struct ScenarioRun {
  std::vector<StepResult> steps;
  int final_session_risk = 0;
  int final_conversation_risk = 0;

  bool blocked() const;
  bool expectations_met() const;
};

// Replays a scenario through a gateway on a simulated clock starting at
// `start`; steps run serially.
ScenarioRun run_scenario(Gateway& gateway, const Scenario& s, risk::TimePoint start = risk::TimePoint{});

}  // namespace prism::hooks
