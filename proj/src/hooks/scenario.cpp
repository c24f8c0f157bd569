#include "prism/hooks/scenario.hpp"

namespace prism::hooks {

namespace {

// -1: allowed anywhere. The prompt and tool phases interleave because an
// agent loop rebuilds the prompt after each tool result.
int phase_rank(Hook h) {
  switch (h) {
    case Hook::message_received: return 0;
    case Hook::before_prompt_build:
    case Hook::before_tool_call:
    case Hook::after_tool_call:
    case Hook::tool_result_persist:
    case Hook::agent_spawn: return 1;
    case Hook::before_message_write:
    case Hook::message_sending: return 2;
    case Hook::session_end:
    case Hook::gateway_start: return -1;
  }
  return -1;
}

std::string need_string(const nlohmann::json& payload, const char* key, std::size_t index) {
  if (!payload.contains(key) || !payload[key].is_string()) {
    throw ScenarioError("step " + std::to_string(index) + ": payload." + key + " must be a string");
  }
  return payload[key].get<std::string>();
}

void check_payload(Hook h, const nlohmann::json& p, std::size_t i) {
  switch (h) {
    case Hook::message_received:
    case Hook::tool_result_persist:
    case Hook::before_message_write:
    case Hook::message_sending: need_string(p, "text", i); break;
    case Hook::before_prompt_build: need_string(p, "prompt", i); break;
    case Hook::after_tool_call:
      need_string(p, "result", i);
      if (p.contains("scanner_annotation") &&
          !(p["scanner_annotation"].is_string() &&
            scan::verdict_from_string(p["scanner_annotation"].get<std::string>()))) {
        throw ScenarioError("step " + std::to_string(i) + ": scanner_annotation must be a verdict");
      }
      [[fallthrough]];
    case Hook::before_tool_call:
      if (need_string(p, "tool", i).empty()) throw ScenarioError("step " + std::to_string(i) + ": tool is empty");
      if (p.contains("args") && !p["args"].is_object()) {
        throw ScenarioError("step " + std::to_string(i) + ": args must be an object");
      }
      break;
    case Hook::gateway_start:
      if (p.contains("snapshot_path")) need_string(p, "snapshot_path", i);
      break;
    case Hook::agent_spawn:
    case Hook::session_end: break;
  }
}

std::optional<Action> action_from_string(std::string_view s) {
  if (s == "proceed") return Action::proceed;
  if (s == "proceed_mutated") return Action::proceed_mutated;
  if (s == "block") return Action::block;
  return std::nullopt;
}

}  // namespace

void validate_phase_order(const std::vector<ScenarioStep>& steps) {
  int current = -1;  // no turn open yet
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const int rank = phase_rank(steps[i].hook);
    if (rank < 0) continue;
    if (rank == 0) {
      current = 0;
      continue;
    }
    if (current < 0) {
      throw ScenarioError("step " + std::to_string(i) + ": " + std::string(to_string(steps[i].hook)) +
                          " before any message_received");
    }
    if (rank < current) {
      throw ScenarioError("step " + std::to_string(i) + ": " + std::string(to_string(steps[i].hook)) +
                          " fires after the outbound phase of the same turn");
    }
    current = rank;
  }
}

Scenario parse_scenario(const nlohmann::json& j) {
  if (!j.is_object()) throw ScenarioError("scenario must be an object");
  Scenario s;
  s.session_id = j.value("session_id", std::string());
  if (s.session_id.empty()) throw ScenarioError("session_id is required");
  if (j.contains("conversation_id") && j["conversation_id"].is_string()) {
    s.conversation_id = j["conversation_id"].get<std::string>();
  }
  s.channel = j.value("channel", std::string("sim"));
  if (!j.contains("steps") || !j["steps"].is_array()) throw ScenarioError("steps must be an array");

  std::size_t i = 0;
  for (const auto& raw : j["steps"]) {
    if (!raw.is_object()) throw ScenarioError("step " + std::to_string(i) + " must be an object");
    ScenarioStep step;
    const auto hook = hook_from_string(raw.value("hook", std::string()));
    if (!hook) throw ScenarioError("step " + std::to_string(i) + ": unknown hook '" + raw.value("hook", std::string()) + "'");
    step.hook = *hook;
    if (raw.contains("payload")) step.payload = raw["payload"];
    if (!step.payload.is_object()) throw ScenarioError("step " + std::to_string(i) + ": payload must be an object");
    check_payload(step.hook, step.payload, i);
    step.advance_ms = raw.value("advance_ms", std::int64_t{0});
    if (step.advance_ms < 0) throw ScenarioError("step " + std::to_string(i) + ": advance_ms is negative");
    if (raw.contains("expected")) {
      const auto& e = raw["expected"];
      const auto action = e.is_string() ? action_from_string(e.get<std::string>())
                                        : action_from_string(e.value("action", std::string()));
      if (!action) throw ScenarioError("step " + std::to_string(i) + ": unknown expected action");
      StepExpectation exp{*action, std::nullopt};
      if (e.is_object() && e.contains("reason_code")) exp.reason_code = e["reason_code"].get<std::string>();
      step.expected = exp;
    }
    s.steps.push_back(std::move(step));
    ++i;
  }
  validate_phase_order(s.steps);
  return s;
}

bool ScenarioRun::blocked() const {
  for (const auto& r : steps) {
    if (r.outcome.action == Action::block) return true;
  }
  return false;
}

bool ScenarioRun::expectations_met() const {
  for (const auto& r : steps) {
    if (!r.expectation_met) return false;
  }
  return true;
}

ScenarioRun run_scenario(Gateway& gateway, const Scenario& s, risk::TimePoint start) {
  validate_phase_order(s.steps);
  ScenarioRun run;
  HookContext ctx{s.session_id, s.conversation_id, s.channel, start};
  for (const auto& step : s.steps) {
    ctx.now += std::chrono::milliseconds(step.advance_ms);
    const auto& p = step.payload;
    auto text = [&](const char* key) { return p.value(key, std::string()); };
    auto call = [&] { return ToolCall{text("tool"), p.value("args", nlohmann::json::object())}; };

    HookOutcome out;
    switch (step.hook) {
      case Hook::message_received: out = gateway.message_received(ctx, text("text")); break;
      case Hook::before_prompt_build: out = gateway.before_prompt_build(ctx, text("prompt")); break;
      case Hook::before_tool_call: out = gateway.before_tool_call(ctx, call()); break;
      case Hook::after_tool_call: {
        scanner::ScanMetadata meta;
        if (p.contains("scanner_annotation")) meta.mock_verdict = scan::verdict_from_string(text("scanner_annotation"));
        out = gateway.after_tool_call(ctx, call(), text("result"), meta);
        break;
      }
      case Hook::tool_result_persist: out = gateway.tool_result_persist(ctx, text("text")); break;
      case Hook::before_message_write: out = gateway.before_message_write(ctx, text("text")); break;
      case Hook::message_sending: out = gateway.message_sending(ctx, text("text")); break;
      case Hook::agent_spawn: out = gateway.agent_spawn(ctx); break;
      case Hook::session_end: out = gateway.session_end(ctx); break;
      case Hook::gateway_start: out = gateway.gateway_start(text("snapshot_path"), ctx.now); break;
    }

    StepResult r{step.hook, out, true};
    if (step.expected) {
      r.expectation_met = out.action == step.expected->action &&
                          (!step.expected->reason_code || out.reason_code == step.expected->reason_code);
    }
    run.steps.push_back(std::move(r));
  }
  run.final_session_risk = gateway.risk().current_risk(risk::RiskKey::session(s.session_id), ctx.now);
  run.final_conversation_risk = gateway.risk().current_risk(Gateway::conversation_key(ctx), ctx.now);
  return run;
}

}  // namespace prism::hooks
