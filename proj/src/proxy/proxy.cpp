#include "prism/proxy/proxy.hpp"

#include <openssl/crypto.h>

namespace prism::proxy {

namespace {

constexpr std::string_view kActor = "invoke-proxy";

bool same_token(std::string_view a, std::string_view b) {
  if (a.size() != b.size() || a.empty()) return false;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

int http_status(const InvokeResult& r) {
  if (r.outcome == Outcome::forwarded) return 200;
  switch (*r.deny_reason) {
    case DenyReason::invalid_request: return 400;
    case DenyReason::auth: return 401;
    case DenyReason::upstream_unavailable: return 502;
    default: return 403;
  }
}

}  // namespace

std::string_view to_string(DenyReason r) {
  switch (r) {
    case DenyReason::invalid_request: return "invalid_request";
    case DenyReason::auth: return "auth";
    case DenyReason::ownership: return "ownership";
    case DenyReason::default_deny: return "default_deny";
    case DenyReason::dangerous_exec: return "dangerous_exec";
    case DenyReason::upstream_unavailable: return "upstream_unavailable";
  }
  return "invalid_request";
}

std::optional<std::string> parse_invoke(const nlohmann::json& body, InvokeRequest& out) {
  if (!body.is_object()) return "body must be a JSON object";
  for (const char* key : {"caller_id", "session_id", "tool"}) {
    if (!body.contains(key) || !body[key].is_string() || body[key].get<std::string>().empty()) {
      return std::string(key) + " must be a non-empty string";
    }
  }
  if (body.contains("args") && !body["args"].is_object()) return "args must be an object";
  if (body.contains("auth_token")) {
    if (!body["auth_token"].is_string()) return "auth_token must be a string";
    out.auth_token = body["auth_token"].get<std::string>();
  }
  out.caller_id = body["caller_id"].get<std::string>();
  out.session_id = body["session_id"].get<std::string>();
  out.tool = body["tool"].get<std::string>();
  out.args = body.value("args", nlohmann::json::object());
  return std::nullopt;
}

nlohmann::json result_to_json(const InvokeResult& r) {
  nlohmann::json j = {{"outcome", r.outcome == Outcome::forwarded ? "forwarded" : "denied"},
                      {"policy_revision", r.policy_revision}};
  if (r.deny_reason) j["deny_reason"] = std::string(to_string(*r.deny_reason));
  if (r.upstream_response) j["upstream_response"] = *r.upstream_response;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

std::optional<nlohmann::json> HttpUpstream::execute(const std::string& tool, const nlohmann::json& args,
                                                    std::string& error) {
  const nlohmann::json body = {{"tool", tool}, {"args", args}};
  const auto res = net::http_call("POST", url_, body.dump(), {{"Content-Type", "application/json"}}, timeout_);
  if (!res.ok) {
    error = res.timed_out ? "upstream timed out" : res.error;
    return std::nullopt;
  }
  auto parsed = nlohmann::json::parse(res.body, nullptr, false);
  return nlohmann::json{{"status", res.status}, {"body", parsed.is_discarded() ? nlohmann::json(res.body) : parsed}};
}

std::optional<nlohmann::json> EchoUpstream::execute(const std::string& tool, const nlohmann::json& args,
                                                    std::string&) {
  return nlohmann::json{{"status", 200}, {"body", {{"ok", true}, {"tool", tool}, {"args", args}}}};
}

bool OwnershipTable::claim(const std::string& session, const std::string& caller, Clock::time_point now) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(session);
  if (it != entries_.end() && now - it->second.last_used >= ttl_) {
    entries_.erase(it);
    it = entries_.end();
  }
  if (it == entries_.end()) {
    entries_.emplace(session, Entry{caller, now, now});
    return true;
  }
  if (it->second.owner != caller) return false;
  it->second.last_used = now;
  return true;
}

std::optional<std::string> OwnershipTable::owner(const std::string& session, Clock::time_point now) const {
  std::lock_guard lock(mu_);
  const auto it = entries_.find(session);
  if (it == entries_.end() || now - it->second.last_used >= ttl_) return std::nullopt;
  return it->second.owner;
}

std::size_t OwnershipTable::sweep(Clock::time_point now) {
  std::lock_guard lock(mu_);
  return std::erase_if(entries_, [&](const auto& kv) { return now - kv.second.last_used >= ttl_; });
}

std::size_t OwnershipTable::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

InvokeProxy::InvokeProxy(policy::PolicyEngine& policy, ProxyOptions options, Upstream& upstream,
                         audit::EventSink& audit, std::function<Clock::time_point()> clock)
    : policy_(policy),
      options_(std::move(options)),
      upstream_(upstream),
      audit_(audit),
      clock_(std::move(clock)),
      ownership_(options_.ownership_ttl) {}

std::optional<std::string> InvokeProxy::authenticate(std::string_view token) const {
  std::optional<std::string> found;
  for (const auto& [t, caller] : options_.callers) {
    if (same_token(token, t)) found = caller;
  }
  return found;
}

InvokeResult InvokeProxy::finish(const InvokeRequest& req, InvokeResult r) {
  nlohmann::json payload = {{"caller_id", req.caller_id},
                            {"tool", req.tool},
                            {"outcome", r.outcome == Outcome::forwarded ? "forwarded" : "denied"},
                            {"policy_revision", r.policy_revision}};
  if (r.deny_reason) payload["deny_reason"] = std::string(to_string(*r.deny_reason));
  if (!r.detail.empty()) payload["detail"] = r.detail;
  audit_.record(kActor, "invoke_decision",
                req.session_id.empty() ? std::nullopt : std::optional<std::string>(req.session_id), payload);
  return r;
}

InvokeResult InvokeProxy::reject_invalid(const std::string& why) {
  InvokeResult r;
  r.deny_reason = DenyReason::invalid_request;
  r.detail = why;
  r.policy_revision = policy_.revision();
  return finish(InvokeRequest{}, std::move(r));
}

InvokeResult InvokeProxy::invoke(const InvokeRequest& req) {
  // One snapshot for the whole decision.
  const auto p = policy_.snapshot();
  InvokeResult r;
  r.policy_revision = p->revision();
  auto deny = [&](DenyReason why, std::string detail) {
    r.outcome = Outcome::denied;
    r.deny_reason = why;
    r.detail = std::move(detail);
    return finish(req, std::move(r));
  };

  if (req.session_id.empty() || req.tool.empty() || req.caller_id.empty()) {
    return deny(DenyReason::invalid_request, "caller_id, session_id and tool are required");
  }
  const auto caller = authenticate(req.auth_token);
  if (!caller || *caller != req.caller_id) return deny(DenyReason::auth, "token does not identify the caller");
  if (!ownership_.claim(req.session_id, req.caller_id, clock_())) {
    return deny(DenyReason::ownership, "session is owned by another caller");
  }
  if (!p->tool_allowed(req.caller_id, req.tool)) {
    return deny(DenyReason::default_deny, "tool '" + req.tool + "' is not allowed for " + req.caller_id);
  }
  for (const auto& field : options_.command_fields) {
    if (!req.args.is_object() || !req.args.contains(field)) continue;
    if (!req.args[field].is_string()) return deny(DenyReason::dangerous_exec, field + " is not text");
    const auto d = p->check_exec(req.args[field].get<std::string>());
    if (d.denied()) return deny(DenyReason::dangerous_exec, policy::explain(d));
  }

  std::string error;
  auto reply = upstream_.execute(req.tool, req.args, error);
  if (!reply) return deny(DenyReason::upstream_unavailable, error);
  r.outcome = Outcome::forwarded;
  r.upstream_response = std::move(reply);
  return finish(req, std::move(r));
}

std::uint64_t InvokeProxy::reload() {
  if (!options_.policy_file.empty()) return policy_.reload_file(options_.policy_file);
  return policy_.reload(policy_.snapshot()->document());
}

nlohmann::json InvokeProxy::health() const {
  return {{"status", "ok"}, {"component", "proxy"}, {"policy_revision", policy_.revision()},
          {"owned_sessions", ownership_.size()}};
}

ProxyServer::ProxyServer(InvokeProxy& proxy) : proxy_(proxy) {
  server_.route("POST", "/invoke", [this](const net::HttpRequest& http) {
    const auto body = nlohmann::json::parse(http.body, nullptr, false);
    InvokeRequest req;
    if (body.is_discarded()) return net::HttpResponse::json(400, result_to_json(proxy_.reject_invalid("body is not JSON")));
    if (auto err = parse_invoke(body, req)) return net::HttpResponse::json(400, result_to_json(proxy_.reject_invalid(*err)));
    if (auto bearer = http.bearer_token()) req.auth_token = *bearer;
    const auto r = proxy_.invoke(req);
    return net::HttpResponse::json(http_status(r), result_to_json(r));
  });
  server_.route("POST", "/reload", [this](const net::HttpRequest& http) {
    const auto token = http.bearer_token();
    if (!token || !proxy_.authenticate(*token)) return net::HttpResponse::json(401, {{"error", "unauthorized"}});
    try {
      const auto rev = proxy_.reload();
      return net::HttpResponse::json(200, {{"policy_revision", rev}});
    } catch (const policy::PolicyError& e) {
      return net::HttpResponse::json(422, {{"error", e.what()}, {"problems", e.problems()}});
    }
  });
  server_.route("GET", "/health", [this](const net::HttpRequest&) { return net::HttpResponse::json(200, proxy_.health()); });
}

int ProxyServer::start(const std::string& host, int port) { return server_.start(host, port); }
void ProxyServer::listen(const std::string& host, int port) { server_.listen(host, port); }

EchoUpstreamServer::EchoUpstreamServer() {
  server_.route("POST", "/execute", [this](const net::HttpRequest& http) {
    const auto body = nlohmann::json::parse(http.body, nullptr, false);
    if (!body.is_object() || !body.contains("tool")) return net::HttpResponse::json(400, {{"error", "expected {tool, args}"}});
    std::string err;
    return net::HttpResponse::json(
        200, echo_.execute(body.value("tool", ""), body.value("args", nlohmann::json::object()), err)->at("body"));
  });
  server_.route("GET", "/health", [](const net::HttpRequest&) {
    return net::HttpResponse::json(200, {{"status", "ok"}, {"component", "upstream"}});
  });
}

}  // namespace prism::proxy
