#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "prism/audit/audit_log.hpp"
#include "prism/net/http.hpp"
#include "prism/policy/policy.hpp"

namespace prism::proxy {

using Clock = std::chrono::steady_clock;

struct InvokeRequest {
  std::string auth_token;
  std::string caller_id;
  std::string session_id;
  std::string tool;
  nlohmann::json args = nlohmann::json::object();
};

// Parses the /invoke body; the token may come from the body or separately.
// Returns an error message for a missing or mistyped field.
std::optional<std::string> parse_invoke(const nlohmann::json& body, InvokeRequest& out);

enum class Outcome { forwarded, denied };

enum class DenyReason { invalid_request, auth, ownership, default_deny, dangerous_exec, upstream_unavailable };
std::string_view to_string(DenyReason r);

struct InvokeResult {
  Outcome outcome = Outcome::denied;
  std::optional<DenyReason> deny_reason;
  std::optional<nlohmann::json> upstream_response;
  std::string detail;
  std::uint64_t policy_revision = 0;
};

nlohmann::json result_to_json(const InvokeResult& r);

// The tool executor behind the proxy.
class Upstream {
 public:
  virtual ~Upstream() = default;
  // nullopt when the upstream could not be reached; error filled in.
  virtual std::optional<nlohmann::json> execute(const std::string& tool, const nlohmann::json& args,
                                                std::string& error) = 0;
};

// Plain HTTP POST of {tool, args}; the reply is returned as {status, body}.
class HttpUpstream final : public Upstream {
 public:
  HttpUpstream(std::string url, std::chrono::milliseconds timeout) : url_(std::move(url)), timeout_(timeout) {}
  std::optional<nlohmann::json> execute(const std::string& tool, const nlohmann::json& args,
                                        std::string& error) override;

 private:
  std::string url_;
  std::chrono::milliseconds timeout_;
};

// In-process executor that echoes the call back; used by the benchmark and
// the local dev loop.
class EchoUpstream final : public Upstream {
 public:
  std::optional<nlohmann::json> execute(const std::string& tool, const nlohmann::json& args,
                                        std::string& error) override;
};

// session -> owning caller. Claims are atomic check-and-set; an entry expires
// `ttl` after the owner's last use.
class OwnershipTable {
 public:
  explicit OwnershipTable(std::chrono::milliseconds ttl) : ttl_(ttl) {}

  // True when `caller` owns (or now becomes owner of) `session`.
  bool claim(const std::string& session, const std::string& caller, Clock::time_point now);
  std::optional<std::string> owner(const std::string& session, Clock::time_point now) const;
  std::size_t sweep(Clock::time_point now);
  std::size_t size() const;

 private:
  struct Entry {
    std::string owner;
    Clock::time_point created;
    Clock::time_point last_used;
  };
  std::chrono::milliseconds ttl_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Entry> entries_;
};

struct ProxyOptions {
  std::map<std::string, std::string> callers;  // token -> caller id
  std::chrono::milliseconds ownership_ttl = std::chrono::minutes(30);
  std::vector<std::string> command_fields = {"command", "cmd"};
  // Re-read by reload(); empty means reload() only bumps the revision.
  std::string policy_file;
};

class InvokeProxy {
 public:
  InvokeProxy(policy::PolicyEngine& policy, ProxyOptions options, Upstream& upstream, audit::EventSink& audit,
              std::function<Clock::time_point()> clock = [] { return Clock::now(); });

  // Check order: auth, ownership, tool allowlist, exec guard, upstream.
  // Every call, allowed or not, produces exactly one audit entry.
  InvokeResult invoke(const InvokeRequest& req);
  // Audits a request that never parsed.
  InvokeResult reject_invalid(const std::string& why);

  // Caller id for a token, constant-time over every configured token.
  std::optional<std::string> authenticate(std::string_view token) const;

  std::uint64_t reload();
  nlohmann::json health() const;
  OwnershipTable& ownership() { return ownership_; }

 private:
  InvokeResult finish(const InvokeRequest& req, InvokeResult r);

  policy::PolicyEngine& policy_;
  ProxyOptions options_;
  Upstream& upstream_;
  audit::EventSink& audit_;
  std::function<Clock::time_point()> clock_;
  OwnershipTable ownership_;
};

class ProxyServer {
 public:
  static constexpr int kDefaultPort = 18767;

  explicit ProxyServer(InvokeProxy& proxy);
  int start(const std::string& host = "127.0.0.1", int port = kDefaultPort);
  void listen(const std::string& host = "127.0.0.1", int port = kDefaultPort);
  void stop() { server_.stop(); }

 private:
  InvokeProxy& proxy_;
  net::HttpServer server_;
};

// Minimal tool executor speaking the upstream protocol (echo).
class EchoUpstreamServer {
 public:
  static constexpr int kDefaultPort = 18769;

  EchoUpstreamServer();
  int start(const std::string& host = "127.0.0.1", int port = kDefaultPort) { return server_.start(host, port); }
  void listen(const std::string& host = "127.0.0.1", int port = kDefaultPort) { server_.listen(host, port); }
  void stop() { server_.stop(); }

 private:
  EchoUpstream echo_;
  net::HttpServer server_;
};

}  // namespace prism::proxy
