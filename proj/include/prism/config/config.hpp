#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prism/policy/policy.hpp"
#include "prism/risk/risk_engine.hpp"
#include "prism/scanner/scanner.hpp"

namespace prism::config {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct ScannerSettings {
  std::string host = "127.0.0.1";
  int port = 18766;
  // Where hooks reach the scanner.
  std::string url = "http://127.0.0.1:18766";
  std::chrono::milliseconds client_timeout{21000};
  std::string token;
  std::string token_env = "PRISM_SCANNER_TOKEN";
  scanner::ModelJudgeConfig model;

  // The environment variable wins over the literal token.
  std::string resolved_token() const;
};

struct ProxySettings {
  std::string host = "127.0.0.1";
  int port = 18767;
  std::string upstream_url = "http://127.0.0.1:18769/execute";
  std::chrono::milliseconds upstream_timeout{5000};
  // Static bearer token -> caller id.
  std::map<std::string, std::string> callers;
  std::chrono::milliseconds ownership_ttl = std::chrono::minutes(30);
};

struct MonitorSettings {
  std::vector<std::string> paths;
  std::chrono::milliseconds poll_interval{5000};
  std::string manifest_path;
};

struct AuditSettings {
  std::string log_path = "prism-audit.jsonl";
  std::string key_env = "PRISM_AUDIT_KEY";
  std::string key_file;
  std::size_t anchor_interval = 10;
};

// The plugin config file: one document for every component. Relative paths
// are resolved against the directory of the file.
struct PluginConfig {
  risk::RiskConfig risk;
  policy::PolicyDocument policy = policy::PolicyDocument::defaults();
  // When set, the policy is read from here instead of the embedded section
  // and /reload re-reads it.
  std::string policy_file;
  std::string snapshot_path = "prism-risk.json";
  ScannerSettings scanner;
  ProxySettings proxy;
  MonitorSettings monitor;
  AuditSettings audit;

  static PluginConfig defaults();
  static PluginConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  static PluginConfig load_file(const std::string& path);
  nlohmann::json to_json() const;
};

enum class Component { scanner, proxy, monitor, dashboard };
std::string_view to_string(Component c);
std::string_view env_var(Component c);

// PRISM_*_START: "1/true/yes/on" enable, "0/false/no/off" disable; unset
// falls back to the component default (dashboard off, the rest on).
// Other values are a usage error.
std::optional<bool> parse_gate(std::string_view value);
bool component_enabled(Component c);

}  // namespace prism::config
