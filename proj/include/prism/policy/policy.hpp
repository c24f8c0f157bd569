#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prism/audit/audit_log.hpp"
#include "prism/common/snapshot.hpp"
#include "prism/policy/net.hpp"
#include "prism/risk/risk_engine.hpp"

namespace prism::policy {

enum class Outcome { allow = 0, warn = 1, deny = 2 };
std::string_view to_string(Outcome o);

enum class DomainTier { trusted, standard, risky, blocked };
// "trusted", "default", "risky", "blocked"
std::string_view to_string(DomainTier t);
std::optional<DomainTier> tier_from_string(std::string_view s);

struct PolicyDecision {
  Outcome outcome = Outcome::allow;
  std::string reason_code;  // empty only for plain allows
  std::optional<std::string> rule_id;
  std::string explanation;
  std::uint64_t revision = 0;

  bool denied() const { return outcome == Outcome::deny; }
};

struct NamedPattern {
  std::string id;
  std::string pattern;
};

struct SecretPattern {
  std::string id;
  std::string pattern;
  std::string action = "block";  // block | redact
};

struct PathException {
  std::string path;
  std::string reason;
  std::string applied_by;
};

struct PolicyDocument {
  std::uint64_t revision = 0;

  struct Exec {
    std::vector<std::string> allowed_executables;
    std::vector<NamedPattern> deny_patterns;
    std::vector<std::string> trampoline_forms;  // "bash -c", "env"
    std::vector<std::string> metachar_set;      // single chars or "$("
  } exec;

  struct Paths {
    std::vector<std::string> protected_paths;
    std::vector<PathException> exceptions;
    std::string home = "/home/agent";
    // Relative candidates resolve against this directory.
    std::string base_dir = "/home/agent/workspace";
  } paths;

  struct Network {
    std::vector<std::string> private_ranges;
    std::map<std::string, DomainTier> domain_tiers;
  } network;

  struct Dlp {
    std::vector<SecretPattern> secret_patterns;
    std::string mask = "[REDACTED_SECRET]";
  } dlp;

  risk::RiskThresholds risk_thresholds;
  std::vector<std::string> scan_tools;
  std::vector<std::string> high_risk_tools;
  // caller id -> tools that caller may invoke through the proxy.
  std::map<std::string, std::vector<std::string>> tool_allowlists;

  static PolicyDocument defaults();
  static PolicyDocument from_json(const nlohmann::json& doc);
  static PolicyDocument load_file(const std::string& path);
  nlohmann::json to_json() const;
};

class PolicyError : public std::runtime_error {
 public:
  explicit PolicyError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct SecretFinding {
  std::string pattern_id;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct SecretScan {
  std::vector<SecretFinding> findings;
  std::string redacted;
};

// Lexical normalization: home expansion, base_dir for relative paths,
// separator collapse and dot-segment removal. nullopt for undecodable input.
std::optional<std::string> normalize_path(std::string_view path, const std::string& home, const std::string& base_dir);

// Splits a command line shell-style (quotes and backslashes). nullopt when a
// quote is left open or the line ends in a bare backslash.
std::optional<std::vector<std::string>> split_command(std::string_view command_line);

// A validated and compiled policy revision. Immutable once built.
class CompiledPolicy {
 public:
  // Throws PolicyError listing every validation problem.
  explicit CompiledPolicy(PolicyDocument doc);
  ~CompiledPolicy();

  const PolicyDocument& document() const { return doc_; }
  std::uint64_t revision() const { return doc_.revision; }

  PolicyDecision check_exec(std::string_view command_line) const;
  PolicyDecision check_path(std::string_view candidate) const;
  PolicyDecision check_url(std::string_view url) const;
  SecretScan scan_secrets(std::string_view text) const;
  DomainTier tier_for(std::string_view host) const;

  bool is_scan_tool(std::string_view tool) const;
  bool is_high_risk_tool(std::string_view tool) const;
  bool tool_allowed(std::string_view caller, std::string_view tool) const;

 private:
  struct Compiled;
  PolicyDecision decide(Outcome o, std::string reason, std::optional<std::string> rule, std::string text) const;

  PolicyDocument doc_;
  std::unique_ptr<Compiled> compiled_;
};

// Holds the active revision; evaluations read an immutable snapshot and a
// reload swaps it atomically.
class PolicyEngine {
 public:
  explicit PolicyEngine(PolicyDocument initial = PolicyDocument::defaults(), audit::EventSink* audit = nullptr);

  std::shared_ptr<const CompiledPolicy> snapshot() const { return active_.load(); }
  std::uint64_t revision() const { return snapshot()->revision(); }

  // Accepted revision is max(active + 1, doc.revision). On validation failure
  // the active policy stays in place, the rejection is audited and PolicyError
  // is rethrown.
  std::uint64_t reload(PolicyDocument doc);
  std::uint64_t reload_file(const std::string& path);

  PolicyDecision check_exec(std::string_view c) const { return snapshot()->check_exec(c); }
  PolicyDecision check_path(std::string_view p) const { return snapshot()->check_path(p); }
  PolicyDecision check_url(std::string_view u) const { return snapshot()->check_url(u); }
  SecretScan scan_secrets(std::string_view t) const { return snapshot()->scan_secrets(t); }

 private:
  mutable std::mutex reload_mu_;
  SnapshotCell<CompiledPolicy> active_;
  audit::EventSink* audit_;
};

std::string explain(const PolicyDecision& d);
nlohmann::json decision_to_json(const PolicyDecision& d);

}  // namespace prism::policy
