#include "prism/hooks/hooks.hpp"

#include <fstream>
#include <sstream>

namespace prism::hooks {

namespace {

constexpr std::string_view kActor = "gateway-hooks";

std::string lower_copy(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool looks_like_path(const std::string& token) {
  return token.starts_with("/") || token == "~" || token.starts_with("~/") || token.starts_with("../");
}

}  // namespace

std::string_view to_string(Hook h) {
  switch (h) {
    case Hook::message_received: return "message_received";
    case Hook::before_prompt_build: return "before_prompt_build";
    case Hook::before_tool_call: return "before_tool_call";
    case Hook::after_tool_call: return "after_tool_call";
    case Hook::tool_result_persist: return "tool_result_persist";
    case Hook::before_message_write: return "before_message_write";
    case Hook::message_sending: return "message_sending";
    case Hook::agent_spawn: return "agent_spawn";
    case Hook::session_end: return "session_end";
    case Hook::gateway_start: return "gateway_start";
  }
  return "message_received";
}

std::optional<Hook> hook_from_string(std::string_view s) {
  for (Hook h : kAllHooks) {
    if (to_string(h) == s) return h;
  }
  return std::nullopt;
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::proceed: return "proceed";
    case Action::proceed_mutated: return "proceed_mutated";
    case Action::block: return "block";
  }
  return "proceed";
}

nlohmann::json outcome_to_json(const HookOutcome& o) {
  nlohmann::json j = {{"action", std::string(to_string(o.action))}};
  if (o.reason_code) j["reason_code"] = *o.reason_code;
  if (o.mutated_payload) j["mutated_payload"] = *o.mutated_payload;
  if (!o.detail.empty()) j["detail"] = o.detail;
  return j;
}

Gateway::Gateway(std::shared_ptr<const scan::HeuristicScanner> heuristics, policy::PolicyEngine& policy,
                 risk::RiskEngine& risk, scanner::ScanClient* scanner, audit::EventSink& audit, HookConfig cfg)
    : heuristics_(std::move(heuristics)),
      policy_(policy),
      risk_(risk),
      scanner_(scanner),
      audit_(audit),
      cfg_(std::move(cfg)) {}

risk::RiskKey Gateway::conversation_key(const HookContext& ctx) {
  if (ctx.conversation_id && !ctx.conversation_id->empty()) return risk::RiskKey::conversation(*ctx.conversation_id);
  return risk::RiskKey::session(ctx.session_id);
}

risk::ResponseLevel Gateway::session_level(const HookContext& ctx, const policy::CompiledPolicy& p) const {
  return risk::level_for(risk_.current_risk(risk::RiskKey::session(ctx.session_id), ctx.now),
                         p.document().risk_thresholds);
}

void Gateway::add_verdict_risk(const risk::RiskKey& key, scan::Verdict v, risk::TimePoint now, const std::string& why) {
  int points = 0;
  if (v == scan::Verdict::suspicious) points = cfg_.points.suspicious;
  if (v == scan::Verdict::malicious) points = cfg_.points.malicious;
  if (points > 0) risk_.add_risk(key, points, why, now);
}

HookOutcome Gateway::blocked(const HookContext& ctx, Hook hook, std::string reason, std::string detail,
                             nlohmann::json extra) {
  extra["hook"] = std::string(to_string(hook));
  extra["reason_code"] = reason;
  extra["detail"] = detail;
  audit_.record(kActor, "hook_block", ctx.session_id, std::move(extra));
  return HookOutcome::block(std::move(reason), std::move(detail));
}

HookOutcome Gateway::guarded(const HookContext& ctx, Hook hook, bool enforcement,
                             const std::function<HookOutcome()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    audit_.record(kActor, "hook_error", ctx.session_id,
                  {{"hook", std::string(to_string(hook))}, {"error", e.what()}, {"fail_closed", enforcement}});
    if (enforcement) return HookOutcome::block("internal_error", e.what());
    return HookOutcome::proceed();
  } catch (...) {
    audit_.record(kActor, "hook_error", ctx.session_id,
                  {{"hook", std::string(to_string(hook))}, {"error", "unknown"}, {"fail_closed", enforcement}});
    if (enforcement) return HookOutcome::block("internal_error", "unknown error");
    return HookOutcome::proceed();
  }
}

HookOutcome Gateway::message_received(const HookContext& ctx, std::string_view text) {
  return guarded(ctx, Hook::message_received, false, [&] {
    const auto r = heuristics_->scan(text, scan::Origin::user_message);
    if (r.verdict != scan::Verdict::benign) {
      const auto key = conversation_key(ctx);
      const bool fallback = key.scope == risk::Scope::session;
      add_verdict_risk(key, r.verdict, ctx.now,
                       fallback ? "inbound message (session fallback)" : "inbound message");
      audit_.record(kActor, "inbound_flagged", ctx.session_id,
                    {{"verdict", std::string(scan::to_string(r.verdict))},
                     {"score", r.score.clamped_score},
                     {"rules", r.score.matched_rule_ids},
                     {"scope", fallback ? "session_fallback" : "conversation"}});
    }
    return HookOutcome::proceed();
  });
}

HookOutcome Gateway::before_prompt_build(const HookContext& ctx, std::string_view prompt) {
  return guarded(ctx, Hook::before_prompt_build, false, [&] {
    const std::string prefix = cfg_.security_notice + "\n\n";
    const bool has_notice = prompt.starts_with(prefix);
    const std::string_view body = has_notice ? prompt.substr(prefix.size()) : prompt;
    const auto r = heuristics_->scan(body, scan::Origin::prompt);
    add_verdict_risk(risk::RiskKey::session(ctx.session_id), r.verdict, ctx.now, "prompt scan");
    const auto p = policy_.snapshot();
    if (session_level(ctx, *p) < risk::ResponseLevel::warn || has_notice) return HookOutcome::proceed();
    audit_.record(kActor, "security_notice", ctx.session_id,
                  {{"risk", risk_.current_risk(risk::RiskKey::session(ctx.session_id), ctx.now)}});
    return HookOutcome::mutated(prefix + std::string(prompt));
  });
}

HookOutcome Gateway::before_tool_call(const HookContext& ctx, const ToolCall& call) {
  return guarded(ctx, Hook::before_tool_call, true, [&]() -> HookOutcome {
    if (call.tool.empty()) return blocked(ctx, Hook::before_tool_call, "invalid_tool_call", "tool name is empty");
    const auto p = policy_.snapshot();
    const auto level = session_level(ctx, *p);
    if (p->is_high_risk_tool(call.tool) && level >= risk::ResponseLevel::block_tools) {
      return blocked(ctx, Hook::before_tool_call, "risk_tool_block",
                     "session risk blocks high-risk tool '" + call.tool + "'",
                     {{"tool", call.tool}, {"level", std::string(risk::to_string(level))}});
    }

    auto deny = [&](const policy::PolicyDecision& d) {
      return blocked(ctx, Hook::before_tool_call, d.reason_code, d.explanation,
                     {{"tool", call.tool}, {"decision", policy::decision_to_json(d)}});
    };
    auto warn = [&](const policy::PolicyDecision& d) {
      risk_.add_risk(risk::RiskKey::session(ctx.session_id), cfg_.points.risky_domain, d.reason_code, ctx.now);
      audit_.record(kActor, "policy_warn", ctx.session_id,
                    {{"tool", call.tool}, {"decision", policy::decision_to_json(d)}});
    };
    auto url_check = [&](const std::string& url) -> std::optional<HookOutcome> {
      const auto d = p->check_url(url);
      if (d.outcome == policy::Outcome::deny) return deny(d);
      if (d.outcome == policy::Outcome::warn) warn(d);
      return std::nullopt;
    };

    const auto& args = call.args.is_object() ? call.args : nlohmann::json::object();
    for (const auto& field : cfg_.command_fields) {
      if (!args.contains(field)) continue;
      if (!args[field].is_string()) return blocked(ctx, Hook::before_tool_call, "parse_error", field + " is not text");
      const std::string cmd = args[field].get<std::string>();
      const auto d = p->check_exec(cmd);
      if (d.denied()) return deny(d);
      const auto tokens = policy::split_command(cmd).value_or(std::vector<std::string>{});
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        if (lower_copy(tokens[i]).find("://") != std::string::npos) {
          if (auto out = url_check(tokens[i])) return *out;
        } else if (looks_like_path(tokens[i])) {
          const auto pd = p->check_path(tokens[i]);
          if (pd.denied()) return deny(pd);
        }
      }
    }
    for (const auto& field : cfg_.path_fields) {
      if (!args.contains(field) || !args[field].is_string()) continue;
      const auto d = p->check_path(args[field].get<std::string>());
      if (d.denied()) return deny(d);
    }
    for (const auto& field : cfg_.url_fields) {
      if (!args.contains(field) || !args[field].is_string()) continue;
      if (auto out = url_check(args[field].get<std::string>())) return *out;
    }
    return HookOutcome::proceed();
  });
}

HookOutcome Gateway::after_tool_call(const HookContext& ctx, const ToolCall& call, std::string_view result_text,
                                     const scanner::ScanMetadata& meta) {
  return guarded(ctx, Hook::after_tool_call, false, [&] {
    const auto p = policy_.snapshot();
    if (!p->is_scan_tool(call.tool)) return HookOutcome::proceed();
    const auto local = heuristics_->scan(result_text, scan::Origin::tool_result);
    if (local.verdict == scan::Verdict::benign) return HookOutcome::proceed();

    const auto key = risk::RiskKey::session(ctx.session_id);
    scanner::ScanClientResult res;
    if (scanner_) {
      res = scanner_->scan(result_text, call.tool, ctx.session_id, meta);
    } else {
      res.error = "no scanner client";
    }
    if (res.response) {
      add_verdict_risk(key, res.response->verdict, ctx.now, "tool result (" + call.tool + ")");
      audit_.record(kActor, "tool_result_scanned", ctx.session_id,
                    {{"tool", call.tool},
                     {"local_score", local.score.clamped_score},
                     {"verdict", std::string(scan::to_string(res.response->verdict))},
                     {"path", std::string(scanner::to_string(res.response->path))}});
    } else {
      risk_.add_risk(key, cfg_.points.scanner_failure, "scanner unavailable", ctx.now);
      audit_.record(kActor, "scanner_failure", ctx.session_id,
                    {{"tool", call.tool}, {"local_score", local.score.clamped_score}, {"error", res.error}});
    }
    return HookOutcome::proceed();
  });
}

HookOutcome Gateway::sanitize(const HookContext& ctx, std::string_view text, Hook hook) {
  const auto r = heuristics_->scan(text, scan::Origin::tool_result);
  if (r.verdict == scan::Verdict::benign) return HookOutcome::proceed();
  const auto spans = scan::suspicious_spans(r.canonical, *heuristics_->rules());
  std::string out;
  std::size_t pos = 0;
  for (const auto& s : spans) {
    out.append(text.substr(pos, s.begin - pos));
    out += cfg_.redaction_marker;
    pos = s.end;
  }
  if (spans.empty()) {
    out = cfg_.redaction_marker;
  } else {
    out.append(text.substr(pos));
  }
  audit_.record(kActor, "content_sanitized", ctx.session_id,
                {{"hook", std::string(to_string(hook))},
                 {"score", r.score.clamped_score},
                 {"rules", r.score.matched_rule_ids},
                 {"spans", spans.size()}});
  return HookOutcome::mutated(std::move(out));
}

HookOutcome Gateway::tool_result_persist(const HookContext& ctx, std::string_view result_text) {
  return guarded(ctx, Hook::tool_result_persist, false, [&] { return sanitize(ctx, result_text, Hook::tool_result_persist); });
}

HookOutcome Gateway::before_message_write(const HookContext& ctx, std::string_view text) {
  return guarded(ctx, Hook::before_message_write, false, [&] { return sanitize(ctx, text, Hook::before_message_write); });
}

HookOutcome Gateway::message_sending(const HookContext& ctx, std::string_view text) {
  return guarded(ctx, Hook::message_sending, true, [&] {
    const auto p = policy_.snapshot();
    const auto secrets = p->scan_secrets(text);
    if (!secrets.findings.empty()) {
      nlohmann::json ids = nlohmann::json::array();
      for (const auto& f : secrets.findings) ids.push_back(f.pattern_id);
      return blocked(ctx, Hook::message_sending, "dlp",
                     std::to_string(secrets.findings.size()) + " secret pattern match(es) in outbound message",
                     {{"patterns", ids}, {"revision", p->revision()}});
    }
    const auto key = conversation_key(ctx);
    const int risk = risk_.current_risk(key, ctx.now);
    if (risk >= p->document().risk_thresholds.tool_block_at) {
      return blocked(ctx, Hook::message_sending, "conversation_risk",
                     "conversation risk " + std::to_string(risk) + " is at or above the tool-block threshold",
                     {{"risk", risk}});
    }
    return HookOutcome::proceed();
  });
}

HookOutcome Gateway::agent_spawn(const HookContext& ctx) {
  return guarded(ctx, Hook::agent_spawn, true, [&] {
    const auto p = policy_.snapshot();
    if (session_level(ctx, *p) == risk::ResponseLevel::block_spawn) {
      return blocked(ctx, Hook::agent_spawn, "risk_spawn_block", "session risk blocks sub-agent creation",
                     {{"risk", risk_.current_risk(risk::RiskKey::session(ctx.session_id), ctx.now)}});
    }
    return HookOutcome::proceed();
  });
}

HookOutcome Gateway::session_end(const HookContext& ctx) {
  return guarded(ctx, Hook::session_end, false, [&] {
    const auto removed = risk_.clear(risk::RiskKey::session(ctx.session_id));
    audit_.record(kActor, "session_end", ctx.session_id, {{"entries_cleared", removed}});
    return HookOutcome::proceed();
  });
}

HookOutcome Gateway::gateway_start(const std::string& snapshot_path, risk::TimePoint now,
                                   std::chrono::system_clock::time_point wall_now) {
  HookContext ctx{"gateway", std::nullopt, "system", now};
  return guarded(ctx, Hook::gateway_start, false, [&] {
    if (snapshot_path.empty()) return HookOutcome::proceed();
    std::ifstream in(snapshot_path);
    if (!in) {
      audit_.record(kActor, "risk_restore_skipped", std::nullopt, {{"path", snapshot_path}, {"reason", "no snapshot"}});
      return HookOutcome::proceed();
    }
    std::stringstream buf;
    buf << in.rdbuf();
    const auto doc = nlohmann::json::parse(buf.str(), nullptr, false);
    const auto rep = risk_.restore(doc, now, wall_now);
    if (rep.ok) {
      audit_.record(kActor, "risk_restored", std::nullopt,
                    {{"path", snapshot_path}, {"restored", rep.restored}, {"dropped_expired", rep.dropped_expired}});
    } else {
      audit_.record(kActor, "risk_restore_failed", std::nullopt,
                    {{"path", snapshot_path}, {"error", doc.is_discarded() ? "snapshot is not valid JSON" : rep.error}});
    }
    return HookOutcome::proceed();
  });
}

bool Gateway::persist_risk(const std::string& snapshot_path, risk::TimePoint now,
                           std::chrono::system_clock::time_point wall_now) {
  const std::string tmp = snapshot_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << risk_.snapshot(now, wall_now).dump() << '\n';
    if (!out) return false;
  }
  return std::rename(tmp.c_str(), snapshot_path.c_str()) == 0;
}

}  // namespace prism::hooks
