#include "prism/config/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace prism::config {

namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out, std::vector<std::string>& problems,
          const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const std::exception&) {
    problems.push_back(where + key + " has the wrong type");
  }
}

void read_ms(const nlohmann::json& obj, const char* key, std::chrono::milliseconds& out,
             std::vector<std::string>& problems, const std::string& where) {
  std::int64_t v = out.count();
  read(obj, key, v, problems, where);
  if (v <= 0) {
    problems.push_back(where + key + " must be positive");
    return;
  }
  out = std::chrono::milliseconds(v);
}

void check_port(int port, const std::string& where, std::vector<std::string>& problems) {
  if (port < 0 || port > 65535) problems.push_back(where + "port out of range");
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid config: " + join(problems)), problems_(std::move(problems)) {}

std::string ScannerSettings::resolved_token() const {
  if (!token_env.empty()) {
    if (const char* v = std::getenv(token_env.c_str()); v && *v) return v;
  }
  return token;
}

PluginConfig PluginConfig::defaults() { return PluginConfig{}; }

PluginConfig PluginConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError({"config must be an object"});
  PluginConfig c;
  std::vector<std::string> problems;

  if (j.contains("risk")) {
    const auto& r = j["risk"];
    auto ttl = c.risk.ttl;
    auto sweep = c.risk.sweep_interval;
    read_ms(r, "ttl_ms", ttl, problems, "risk.");
    read_ms(r, "sweep_interval_ms", sweep, problems, "risk.");
    c.risk.ttl = ttl;
    c.risk.sweep_interval = sweep;
  }

  read(j, "policy_file", c.policy_file, problems, "");
  c.policy_file = resolve(base_dir, c.policy_file);
  try {
    if (!c.policy_file.empty()) {
      c.policy = policy::PolicyDocument::load_file(c.policy_file);
    } else if (j.contains("policy")) {
      c.policy = policy::PolicyDocument::from_json(j["policy"]);
    }
    // Thresholds written at the top level override the policy's own.
    if (j.contains("risk") && j["risk"].contains("thresholds")) {
      const auto& t = j["risk"]["thresholds"];
      read(t, "warn_at", c.policy.risk_thresholds.warn_at, problems, "risk.thresholds.");
      read(t, "tool_block_at", c.policy.risk_thresholds.tool_block_at, problems, "risk.thresholds.");
      read(t, "spawn_block_at", c.policy.risk_thresholds.spawn_block_at, problems, "risk.thresholds.");
    }
    c.risk.thresholds = c.policy.risk_thresholds;
    policy::CompiledPolicy check(c.policy);
  } catch (const policy::PolicyError& e) {
    for (const auto& p : e.problems()) problems.push_back("policy: " + p);
  }

  read(j, "snapshot_path", c.snapshot_path, problems, "");
  c.snapshot_path = resolve(base_dir, c.snapshot_path);

  if (j.contains("scanner")) {
    const auto& s = j["scanner"];
    read(s, "host", c.scanner.host, problems, "scanner.");
    read(s, "port", c.scanner.port, problems, "scanner.");
    read(s, "url", c.scanner.url, problems, "scanner.");
    read_ms(s, "client_timeout_ms", c.scanner.client_timeout, problems, "scanner.");
    read(s, "token", c.scanner.token, problems, "scanner.");
    read(s, "token_env", c.scanner.token_env, problems, "scanner.");
    if (s.contains("model")) {
      const auto& m = s["model"];
      read(m, "endpoint", c.scanner.model.endpoint, problems, "scanner.model.");
      read(m, "label", c.scanner.model.model_label, problems, "scanner.model.");
      read_ms(m, "timeout_ms", c.scanner.model.timeout, problems, "scanner.model.");
      read(m, "max_concurrent_calls", c.scanner.model.max_concurrent_calls, problems, "scanner.model.");
      std::string mode(scanner::to_string(c.scanner.model.mode));
      read(m, "mode", mode, problems, "scanner.model.");
      if (const auto parsed = scanner::model_mode_from_string(mode)) {
        c.scanner.model.mode = *parsed;
      } else {
        problems.push_back("scanner.model.mode must be live, mock or disabled");
      }
      if (c.scanner.model.max_concurrent_calls < 1) {
        problems.push_back("scanner.model.max_concurrent_calls must be at least 1");
      }
    }
    check_port(c.scanner.port, "scanner.", problems);
  }

  if (j.contains("proxy")) {
    const auto& p = j["proxy"];
    read(p, "host", c.proxy.host, problems, "proxy.");
    read(p, "port", c.proxy.port, problems, "proxy.");
    read(p, "upstream_url", c.proxy.upstream_url, problems, "proxy.");
    read_ms(p, "upstream_timeout_ms", c.proxy.upstream_timeout, problems, "proxy.");
    read_ms(p, "ownership_ttl_ms", c.proxy.ownership_ttl, problems, "proxy.");
    read(p, "callers", c.proxy.callers, problems, "proxy.");
    for (const auto& [token, caller] : c.proxy.callers) {
      if (token.empty() || caller.empty()) problems.push_back("proxy.callers entries need a token and a caller id");
    }
    check_port(c.proxy.port, "proxy.", problems);
  }

  if (j.contains("monitor")) {
    const auto& m = j["monitor"];
    read(m, "paths", c.monitor.paths, problems, "monitor.");
    read_ms(m, "poll_interval_ms", c.monitor.poll_interval, problems, "monitor.");
    read(m, "manifest_path", c.monitor.manifest_path, problems, "monitor.");
    for (auto& p : c.monitor.paths) p = resolve(base_dir, p);
    c.monitor.manifest_path = resolve(base_dir, c.monitor.manifest_path);
  }

  if (j.contains("audit")) {
    const auto& a = j["audit"];
    read(a, "log_path", c.audit.log_path, problems, "audit.");
    read(a, "key_env", c.audit.key_env, problems, "audit.");
    read(a, "key_file", c.audit.key_file, problems, "audit.");
    read(a, "anchor_interval", c.audit.anchor_interval, problems, "audit.");
    if (c.audit.anchor_interval == 0) problems.push_back("audit.anchor_interval must be positive");
    c.audit.key_file = resolve(base_dir, c.audit.key_file);
  }
  c.audit.log_path = resolve(base_dir, c.audit.log_path);

  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

PluginConfig PluginConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path});
  std::stringstream buf;
  buf << in.rdbuf();
  const auto j = nlohmann::json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw ConfigError({"config file " + path + " is not valid JSON"});
  const auto dir = fs::path(path).parent_path();
  return from_json(j, dir.empty() ? "." : dir.string());
}

nlohmann::json PluginConfig::to_json() const {
  nlohmann::json j = {
      {"risk",
       {{"ttl_ms", risk.ttl.count()},
        {"sweep_interval_ms", risk.sweep_interval.count()},
        {"thresholds",
         {{"warn_at", policy.risk_thresholds.warn_at},
          {"tool_block_at", policy.risk_thresholds.tool_block_at},
          {"spawn_block_at", policy.risk_thresholds.spawn_block_at}}}}},
      {"snapshot_path", snapshot_path},
      {"scanner",
       {{"host", scanner.host},
        {"port", scanner.port},
        {"url", scanner.url},
        {"client_timeout_ms", scanner.client_timeout.count()},
        {"token_env", scanner.token_env},
        {"model",
         {{"endpoint", scanner.model.endpoint},
          {"label", scanner.model.model_label},
          {"timeout_ms", scanner.model.timeout.count()},
          {"mode", std::string(scanner::to_string(scanner.model.mode))},
          {"max_concurrent_calls", scanner.model.max_concurrent_calls}}}}},
      {"proxy",
       {{"host", proxy.host},
        {"port", proxy.port},
        {"upstream_url", proxy.upstream_url},
        {"upstream_timeout_ms", proxy.upstream_timeout.count()},
        {"ownership_ttl_ms", proxy.ownership_ttl.count()}}},
      {"monitor",
       {{"paths", monitor.paths},
        {"poll_interval_ms", monitor.poll_interval.count()},
        {"manifest_path", monitor.manifest_path}}},
      {"audit",
       {{"log_path", audit.log_path},
        {"key_env", audit.key_env},
        {"key_file", audit.key_file},
        {"anchor_interval", audit.anchor_interval}}},
  };
  if (policy_file.empty()) {
    j["policy"] = policy.to_json();
  } else {
    j["policy_file"] = policy_file;
  }
  return j;
}

std::string_view to_string(Component c) {
  switch (c) {
    case Component::scanner: return "scanner";
    case Component::proxy: return "proxy";
    case Component::monitor: return "monitor";
    case Component::dashboard: return "dashboard";
  }
  return "scanner";
}

std::string_view env_var(Component c) {
  switch (c) {
    case Component::scanner: return "PRISM_SCANNER_START";
    case Component::proxy: return "PRISM_PROXY_START";
    case Component::monitor: return "PRISM_MONITOR_START";
    case Component::dashboard: return "PRISM_DASHBOARD_START";
  }
  return "PRISM_SCANNER_START";
}

std::optional<bool> parse_gate(std::string_view value) {
  std::string v(value);
  for (auto& ch : v) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  return std::nullopt;
}

bool component_enabled(Component c) {
  const std::string name(env_var(c));
  const char* raw = std::getenv(name.c_str());
  if (!raw || !*raw) return c != Component::dashboard;
  const auto v = parse_gate(raw);
  if (!v) throw ConfigError({name + " must be one of 1/0/true/false/yes/no/on/off"});
  return *v;
}

}  // namespace prism::config
