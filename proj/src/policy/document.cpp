#include <fstream>
#include <sstream>

#include "prism/policy/policy.hpp"

namespace prism::policy {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::allow: return "allow";
    case Outcome::warn: return "warn";
    case Outcome::deny: return "deny";
  }
  return "deny";
}

std::string_view to_string(DomainTier t) {
  switch (t) {
    case DomainTier::trusted: return "trusted";
    case DomainTier::standard: return "default";
    case DomainTier::risky: return "risky";
    case DomainTier::blocked: return "blocked";
  }
  return "default";
}

std::optional<DomainTier> tier_from_string(std::string_view s) {
  if (s == "trusted") return DomainTier::trusted;
  if (s == "default") return DomainTier::standard;
  if (s == "risky") return DomainTier::risky;
  if (s == "blocked") return DomainTier::blocked;
  return std::nullopt;
}

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

}  // namespace

PolicyError::PolicyError(std::vector<std::string> problems)
    : std::runtime_error("invalid policy: " + join(problems)), problems_(std::move(problems)) {}

PolicyDocument PolicyDocument::defaults() {
  PolicyDocument d;
  d.revision = 1;
  d.exec.allowed_executables = {"ls",  "cat",  "head", "tail", "grep", "wc",   "find",  "echo", "pwd",
                                "git", "make", "sort", "uniq", "diff", "date", "mkdir", "touch", "cp",
                                "mv",  "jq",   "tree", "sed",  "awk",  "curl", "python3", "node", "npm"};
  d.exec.deny_patterns = {
      {"destructive_rm", R"(\brm\s+-[a-z]*r[a-z]*\s+(?:/|~|\*|\$home)(?:\s|$|/\*))"},
      {"world_writable", R"(\bchmod\s+(?:-r\s+)?0?777\b)"},
      {"disk_wipe", R"(\b(?:mkfs(?:\.\w+)?|dd\s+if=))"},
      {"netcat_exec", R"(\b(?:nc|ncat|netcat)\b.*\s-[a-z]*e\b)"},
      {"file_upload", R"(\bcurl\b.*\s(?:(?:-d|--data(?:-binary)?|-F|--form)\s+\S*@|(?:-T|--upload-file)\s+\S))"},
  };
  d.exec.trampoline_forms = {"bash -c", "sh -c", "zsh -c", "python -c", "python3 -c", "node -e", "perl -e", "env"};
  d.exec.metachar_set = {";", "|", "&", "`", "$(", ">", "<", "\n"};

  d.paths.protected_paths = {"/etc/passwd", "/etc/shadow", "/etc/sudoers", "/root", "~/.ssh",
                             "~/.aws",      "~/.gnupg",    "~/.config/prism"};

  d.network.private_ranges = {"0.0.0.0/8",      "10.0.0.0/8", "127.0.0.0/8", "169.254.0.0/16", "172.16.0.0/12",
                              "192.168.0.0/16", "::1/128",    "::/128",      "fc00::/7",       "fe80::/10"};
  d.network.domain_tiers = {{"github.com", DomainTier::trusted},
                            {"pypi.org", DomainTier::trusted},
                            {"pastebin.com", DomainTier::risky},
                            {"transfer.sh", DomainTier::blocked},
                            {"webhook.site", DomainTier::blocked}};

  d.dlp.secret_patterns = {
      {"api_key_sk", R"(\bsk-[A-Za-z0-9_\-]{17,})", "block"},
      {"aws_access_key_id", R"(\b(?:AKIA|ASIA)[A-Z0-9]{16}\b)", "block"},
      {"bearer_token", R"(\b[Bb]earer\s+[A-Za-z0-9\-._~+/]{16,}=*)", "block"},
      {"pem_private_key", R"(-----BEGIN (?:[A-Z0-9]+ )*PRIVATE KEY-----)", "block"},
  };

  d.scan_tools = {"web_fetch", "browser", "read_file", "http_get", "web_search"};
  d.high_risk_tools = {"exec", "shell", "write_file", "send_email", "http_post", "delete_file"};
  return d;
}

namespace {

template <typename T>
void read_if(const nlohmann::json& obj, const char* key, T& out, std::vector<std::string>& problems,
             const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const std::exception&) {
    problems.push_back(where + key + " has the wrong type");
  }
}

}  // namespace

PolicyDocument PolicyDocument::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw PolicyError({"policy document must be an object"});
  PolicyDocument d = defaults();
  std::vector<std::string> problems;
  read_if(j, "revision", d.revision, problems, "");

  if (j.contains("exec")) {
    const auto& e = j["exec"];
    read_if(e, "allowed_executables", d.exec.allowed_executables, problems, "exec.");
    read_if(e, "trampoline_forms", d.exec.trampoline_forms, problems, "exec.");
    read_if(e, "metachar_set", d.exec.metachar_set, problems, "exec.");
    if (e.contains("deny_patterns")) {
      d.exec.deny_patterns.clear();
      try {
        for (const auto& p : e["deny_patterns"]) {
          if (p.is_string()) {
            d.exec.deny_patterns.push_back({"deny_" + std::to_string(d.exec.deny_patterns.size()), p.get<std::string>()});
          } else {
            d.exec.deny_patterns.push_back({p.at("id").get<std::string>(), p.at("pattern").get<std::string>()});
          }
        }
      } catch (const std::exception&) {
        problems.push_back("exec.deny_patterns must list strings or {id, pattern} objects");
      }
    }
  }

  if (j.contains("paths")) {
    const auto& p = j["paths"];
    read_if(p, "protected", d.paths.protected_paths, problems, "paths.");
    read_if(p, "home", d.paths.home, problems, "paths.");
    read_if(p, "base_dir", d.paths.base_dir, problems, "paths.");
    if (p.contains("exceptions")) {
      d.paths.exceptions.clear();
      try {
        for (const auto& x : p["exceptions"]) {
          d.paths.exceptions.push_back({x.at("path").get<std::string>(), x.value("reason", std::string()),
                                        x.value("applied_by", std::string())});
        }
      } catch (const std::exception&) {
        problems.push_back("paths.exceptions entries need a string path");
      }
    }
  }

  if (j.contains("network")) {
    const auto& n = j["network"];
    read_if(n, "private_ranges", d.network.private_ranges, problems, "network.");
    if (n.contains("domain_tiers")) {
      d.network.domain_tiers.clear();
      if (!n["domain_tiers"].is_object()) {
        problems.push_back("network.domain_tiers must map domain suffixes to tiers");
      } else {
        for (const auto& [domain, tier] : n["domain_tiers"].items()) {
          const auto t = tier.is_string() ? tier_from_string(tier.get<std::string>()) : std::nullopt;
          if (!t) {
            problems.push_back("network.domain_tiers." + domain + " has an unknown tier");
            continue;
          }
          d.network.domain_tiers[domain] = *t;
        }
      }
    }
  }

  if (j.contains("dlp")) {
    const auto& x = j["dlp"];
    read_if(x, "mask", d.dlp.mask, problems, "dlp.");
    if (x.contains("secret_patterns")) {
      d.dlp.secret_patterns.clear();
      try {
        for (const auto& p : x["secret_patterns"]) {
          d.dlp.secret_patterns.push_back(
              {p.at("id").get<std::string>(), p.at("pattern").get<std::string>(), p.value("action", std::string("block"))});
        }
      } catch (const std::exception&) {
        problems.push_back("dlp.secret_patterns entries need string id and pattern");
      }
    }
  }

  if (j.contains("risk_thresholds")) {
    const auto& t = j["risk_thresholds"];
    read_if(t, "warn_at", d.risk_thresholds.warn_at, problems, "risk_thresholds.");
    read_if(t, "tool_block_at", d.risk_thresholds.tool_block_at, problems, "risk_thresholds.");
    read_if(t, "spawn_block_at", d.risk_thresholds.spawn_block_at, problems, "risk_thresholds.");
  }
  read_if(j, "scan_tools", d.scan_tools, problems, "");
  read_if(j, "high_risk_tools", d.high_risk_tools, problems, "");
  read_if(j, "tool_allowlists", d.tool_allowlists, problems, "");

  if (!problems.empty()) throw PolicyError(std::move(problems));
  return d;
}

PolicyDocument PolicyDocument::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PolicyError({"cannot read policy file " + path});
  std::stringstream buf;
  buf << in.rdbuf();
  const auto j = nlohmann::json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw PolicyError({"policy file " + path + " is not valid JSON"});
  return from_json(j);
}

nlohmann::json PolicyDocument::to_json() const {
  nlohmann::json deny = nlohmann::json::array();
  for (const auto& p : exec.deny_patterns) deny.push_back({{"id", p.id}, {"pattern", p.pattern}});
  nlohmann::json exceptions = nlohmann::json::array();
  for (const auto& x : paths.exceptions) {
    exceptions.push_back({{"path", x.path}, {"reason", x.reason}, {"applied_by", x.applied_by}});
  }
  nlohmann::json tiers = nlohmann::json::object();
  for (const auto& [domain, tier] : network.domain_tiers) tiers[domain] = std::string(to_string(tier));
  nlohmann::json secrets = nlohmann::json::array();
  for (const auto& s : dlp.secret_patterns) {
    secrets.push_back({{"id", s.id}, {"pattern", s.pattern}, {"action", s.action}});
  }
  return {
      {"revision", revision},
      {"exec",
       {{"allowed_executables", exec.allowed_executables},
        {"deny_patterns", deny},
        {"trampoline_forms", exec.trampoline_forms},
        {"metachar_set", exec.metachar_set}}},
      {"paths",
       {{"protected", paths.protected_paths},
        {"exceptions", exceptions},
        {"home", paths.home},
        {"base_dir", paths.base_dir}}},
      {"network", {{"private_ranges", network.private_ranges}, {"domain_tiers", tiers}}},
      {"dlp", {{"secret_patterns", secrets}, {"mask", dlp.mask}}},
      {"risk_thresholds",
       {{"warn_at", risk_thresholds.warn_at},
        {"tool_block_at", risk_thresholds.tool_block_at},
        {"spawn_block_at", risk_thresholds.spawn_block_at}}},
      {"scan_tools", scan_tools},
      {"high_risk_tools", high_risk_tools},
      {"tool_allowlists", tool_allowlists},
  };
}

}  // namespace prism::policy
