#include "prism/policy/policy.hpp"

#include <boost/regex.hpp>

#include <algorithm>
#include <cctype>

#include "prism/common/utf8.hpp"

namespace prism::policy {

// ---------------------------------------------------------------- helpers

std::optional<std::string> normalize_path(std::string_view path, const std::string& home, const std::string& base_dir) {
  if (!utf8::is_valid(path) || path.find('\0') != std::string_view::npos) return std::nullopt;
  std::string full;
  if (path == "~" || path.starts_with("~/")) {
    full = home + std::string(path.substr(1));
  } else if (path.starts_with("/")) {
    full = std::string(path);
  } else {
    full = base_dir + "/" + std::string(path);
  }
  std::vector<std::string_view> parts;
  std::string_view rest = full;
  while (!rest.empty()) {
    const auto slash = rest.find('/');
    const auto seg = rest.substr(0, slash);
    if (seg == "..") {
      if (!parts.empty()) parts.pop_back();
    } else if (!seg.empty() && seg != ".") {
      parts.push_back(seg);
    }
    if (slash == std::string_view::npos) break;
    rest.remove_prefix(slash + 1);
  }
  std::string out;
  for (const auto& p : parts) {
    out += '/';
    out += p;
  }
  return out.empty() ? std::string("/") : out;
}

namespace {

struct SplitResult {
  std::vector<std::string> tokens;
  std::size_t first_token_end = 0;  // raw offset just past the first token
};

std::optional<SplitResult> split_raw(std::string_view s) {
  SplitResult r;
  std::string cur;
  bool in_token = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\'') {
      const auto close = s.find('\'', i + 1);
      if (close == std::string_view::npos) return std::nullopt;
      cur.append(s.substr(i + 1, close - i - 1));
      i = close;
      in_token = true;
    } else if (c == '"') {
      std::size_t j = i + 1;
      for (; j < s.size() && s[j] != '"'; ++j) {
        if (s[j] == '\\' && j + 1 < s.size()) ++j;
        cur.push_back(s[j]);
      }
      if (j >= s.size()) return std::nullopt;
      i = j;
      in_token = true;
    } else if (c == '\\') {
      if (i + 1 >= s.size()) return std::nullopt;
      cur.push_back(s[++i]);
      in_token = true;
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (in_token) {
        if (r.tokens.empty()) r.first_token_end = i;
        r.tokens.push_back(std::move(cur));
        cur.clear();
        in_token = false;
      }
    } else {
      cur.push_back(c);
      in_token = true;
    }
  }
  if (in_token) {
    if (r.tokens.empty()) r.first_token_end = s.size();
    r.tokens.push_back(std::move(cur));
  }
  return r;
}

std::string basename_of(std::string_view token) {
  const auto slash = token.rfind('/');
  return std::string(slash == std::string_view::npos ? token : token.substr(slash + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_env_assignment(std::string_view token) {
  const auto eq = token.find('=');
  if (eq == std::string_view::npos || eq == 0) return false;
  return std::all_of(token.begin(), token.begin() + static_cast<std::ptrdiff_t>(eq),
                     [](unsigned char c) { return std::isalnum(c) || c == '_'; });
}

// "python3" matches "python3", "python3.12" and "/usr/bin/python3".
bool head_matches(const std::string& base, const std::string& form_head) {
  if (base == form_head) return true;
  if (!base.starts_with(form_head)) return false;
  return std::all_of(base.begin() + static_cast<std::ptrdiff_t>(form_head.size()), base.end(),
                     [](char c) { return (c >= '0' && c <= '9') || c == '.'; });
}

bool flag_present(const std::vector<std::string>& tokens, const std::string& flag) {
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t == flag) return true;
    // Clustered short options such as "-lc" or "-xe".
    if (flag.size() == 2 && flag[0] == '-' && t.size() > 2 && t[0] == '-' && t[1] != '-' &&
        t.find(flag[1]) != std::string::npos && std::all_of(t.begin() + 1, t.end(), [](unsigned char c) {
          return std::isalpha(c);
        })) {
      return true;
    }
  }
  return false;
}

bool git_ssh_override(const std::vector<std::string>& tokens, std::size_t head_index) {
  for (std::size_t i = 0; i < head_index; ++i) {
    const auto name = tokens[i].substr(0, tokens[i].find('='));
    if (name == "GIT_SSH" || name == "GIT_SSH_COMMAND" || name == "GIT_SSH_VARIANT") return true;
  }
  if (head_index >= tokens.size() || basename_of(tokens[head_index]) != "git") return false;
  for (std::size_t i = head_index + 1; i < tokens.size(); ++i) {
    const std::string t = lower(tokens[i]);
    if (t.find("core.sshcommand") != std::string::npos) return true;
    if (t.find("git_ssh") != std::string::npos) return true;
    if (t.starts_with("--upload-pack") || t.starts_with("--receive-pack") || t.starts_with("ext::")) return true;
    if (t.find("protocol.ext.allow") != std::string::npos) return true;
  }
  return false;
}

bool under(const std::string& candidate, const std::string& root) {
  if (root == "/") return true;
  return candidate == root || (candidate.starts_with(root) && candidate[root.size()] == '/');
}

bool looks_numeric_host(std::string_view host) {
  return !host.empty() && std::all_of(host.begin(), host.end(), [](unsigned char c) {
    return std::isxdigit(c) || c == '.' || c == 'x' || c == 'X';
  }) && std::isdigit(static_cast<unsigned char>(host.front()));
}

}  // namespace

std::optional<std::vector<std::string>> split_command(std::string_view command_line) {
  auto r = split_raw(command_line);
  if (!r) return std::nullopt;
  return std::move(r->tokens);
}

// ---------------------------------------------------------------- compiled policy

struct CompiledPolicy::Compiled {
  struct Trampoline {
    std::string form;
    std::string head;
    std::string flag;
  };
  std::vector<Trampoline> trampolines;
  std::vector<boost::regex> deny;
  std::vector<boost::regex> secrets;
  std::vector<IpRange> ranges;
  std::vector<std::string> protected_norm;
  std::vector<std::string> exception_norm;
  std::set<std::string> allowed;
  std::set<std::string> scan_tools;
  std::set<std::string> high_risk;
  std::map<std::string, std::set<std::string>, std::less<>> tool_allow;
};

CompiledPolicy::CompiledPolicy(PolicyDocument doc) : doc_(std::move(doc)), compiled_(std::make_unique<Compiled>()) {
  std::vector<std::string> problems;
  auto& c = *compiled_;

  if (!doc_.risk_thresholds.valid()) problems.push_back("risk_thresholds must satisfy 0 < warn < tool_block < spawn_block");

  for (const auto& form : doc_.exec.trampoline_forms) {
    const auto tokens = split_command(form);
    if (!tokens || tokens->empty() || tokens->size() > 2) {
      problems.push_back("trampoline form '" + form + "' must be an executable with at most one flag");
      continue;
    }
    c.trampolines.push_back({form, (*tokens)[0], tokens->size() == 2 ? (*tokens)[1] : ""});
  }
  for (const auto& m : doc_.exec.metachar_set) {
    if (m.empty()) problems.push_back("metachar_set entries must be non-empty");
  }
  std::set<std::string> ids;
  for (const auto& p : doc_.exec.deny_patterns) {
    if (!ids.insert("exec:" + p.id).second) problems.push_back("duplicate deny pattern id '" + p.id + "'");
    try {
      c.deny.emplace_back(p.pattern, boost::regex::perl | boost::regex::icase);
    } catch (const std::exception& e) {
      problems.push_back("deny pattern '" + p.id + "' does not compile: " + e.what());
    }
  }
  for (const auto& s : doc_.dlp.secret_patterns) {
    if (!ids.insert("dlp:" + s.id).second) problems.push_back("duplicate secret pattern id '" + s.id + "'");
    if (s.action != "block" && s.action != "redact") {
      problems.push_back("secret pattern '" + s.id + "' action must be block or redact");
    }
    try {
      c.secrets.emplace_back(s.pattern, boost::regex::perl);
      if (boost::regex_search(doc_.dlp.mask, c.secrets.back())) {
        problems.push_back("secret pattern '" + s.id + "' matches the redaction mask");
      }
    } catch (const std::exception& e) {
      problems.push_back("secret pattern '" + s.id + "' does not compile: " + e.what());
    }
  }
  if (doc_.dlp.mask.empty()) problems.push_back("dlp.mask must be non-empty");

  for (const auto& r : doc_.network.private_ranges) {
    if (auto parsed = parse_range(r)) {
      c.ranges.push_back(*parsed);
    } else {
      problems.push_back("private range '" + r + "' is not an address block");
    }
  }
  for (const auto& [domain, tier] : doc_.network.domain_tiers) {
    if (domain.empty() || domain.front() == '.' || lower(domain) != domain) {
      problems.push_back("domain tier key '" + domain + "' must be a lower-case domain suffix");
    }
  }

  if (!doc_.paths.home.starts_with("/")) problems.push_back("paths.home must be absolute");
  if (!doc_.paths.base_dir.starts_with("/")) problems.push_back("paths.base_dir must be absolute");
  for (const auto& p : doc_.paths.protected_paths) {
    if (auto n = normalize_path(p, doc_.paths.home, doc_.paths.base_dir)) {
      c.protected_norm.push_back(*n);
    } else {
      problems.push_back("protected path '" + p + "' is not decodable");
    }
  }
  for (const auto& x : doc_.paths.exceptions) {
    const auto n = normalize_path(x.path, doc_.paths.home, doc_.paths.base_dir);
    if (!n) {
      problems.push_back("exception path '" + x.path + "' is not decodable");
      c.exception_norm.emplace_back();
      continue;
    }
    const bool covered = std::any_of(c.protected_norm.begin(), c.protected_norm.end(),
                                     [&](const std::string& p) { return under(*n, p); });
    if (!covered) problems.push_back("exception '" + x.path + "' does not reference a protected path");
    c.exception_norm.push_back(*n);
  }

  c.allowed.insert(doc_.exec.allowed_executables.begin(), doc_.exec.allowed_executables.end());
  c.scan_tools.insert(doc_.scan_tools.begin(), doc_.scan_tools.end());
  c.high_risk.insert(doc_.high_risk_tools.begin(), doc_.high_risk_tools.end());
  for (const auto& [caller, tools] : doc_.tool_allowlists) c.tool_allow[caller].insert(tools.begin(), tools.end());

  if (!problems.empty()) throw PolicyError(std::move(problems));
}

CompiledPolicy::~CompiledPolicy() = default;

PolicyDecision CompiledPolicy::decide(Outcome o, std::string reason, std::optional<std::string> rule,
                                      std::string text) const {
  return {o, std::move(reason), std::move(rule), std::move(text), doc_.revision};
}

PolicyDecision CompiledPolicy::check_exec(std::string_view command_line) const {
  const auto& c = *compiled_;
  const auto first = command_line.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return decide(Outcome::deny, "parse_error", std::nullopt, "empty command line");
  }
  const auto split = split_raw(command_line);
  if (!split) return decide(Outcome::deny, "parse_error", std::nullopt, "unbalanced quoting or trailing escape");
  const auto& tokens = split->tokens;

  std::size_t head_index = 0;
  while (head_index < tokens.size() && is_env_assignment(tokens[head_index])) ++head_index;
  const std::string head = head_index < tokens.size() ? basename_of(tokens[head_index]) : "";

  if (head_index == 0) {
    for (const auto& t : c.trampolines) {
      if (!head_matches(head, t.head)) continue;
      if (t.flag.empty() || flag_present(tokens, t.flag)) {
        return decide(Outcome::deny, "trampoline", "trampoline:" + t.form,
                      "'" + head + "' matches trampoline form '" + t.form + "' which can run arbitrary code");
      }
    }
  }
  if (git_ssh_override(tokens, head_index)) {
    return decide(Outcome::deny, "git_ssh_override", "git_ssh_override",
                  "git invocation overrides the SSH command or transport helper");
  }
  const std::string_view tail = command_line.substr(split->first_token_end);
  for (const auto& m : doc_.exec.metachar_set) {
    if (tail.find(m) != std::string_view::npos) {
      const std::string shown = m == "\n" ? "newline" : "'" + m + "'";
      return decide(Outcome::deny, "metachar", "metachar:" + (m == "\n" ? std::string("newline") : m),
                    "shell metacharacter " + shown + " outside the executable token");
    }
  }
  if (head_index != 0 || (!c.allowed.count(head) && !c.allowed.count(tokens[0]))) {
    return decide(Outcome::deny, "not_allowlisted", std::nullopt,
                  "executable '" + (head_index < tokens.size() ? tokens[head_index] : tokens[0]) +
                      "' is not in allowed_executables");
  }
  for (std::size_t i = 0; i < c.deny.size(); ++i) {
    if (boost::regex_search(command_line.begin(), command_line.end(), c.deny[i])) {
      return decide(Outcome::deny, "deny_pattern", "deny:" + doc_.exec.deny_patterns[i].id,
                    "command matches deny pattern '" + doc_.exec.deny_patterns[i].id + "'");
    }
  }
  return decide(Outcome::allow, "", std::nullopt, "executable '" + head + "' is allowlisted");
}

PolicyDecision CompiledPolicy::check_path(std::string_view candidate) const {
  const auto& c = *compiled_;
  const auto norm = normalize_path(candidate, doc_.paths.home, doc_.paths.base_dir);
  if (!norm) return decide(Outcome::deny, "path_undecodable", std::nullopt, "path is not valid UTF-8 text");
  for (std::size_t i = 0; i < c.protected_norm.size(); ++i) {
    if (!under(*norm, c.protected_norm[i])) continue;
    for (std::size_t k = 0; k < c.exception_norm.size(); ++k) {
      if (!c.exception_norm[k].empty() && under(*norm, c.exception_norm[k])) {
        const auto& x = doc_.paths.exceptions[k];
        return decide(Outcome::allow, "exception", "exception:" + x.path,
                      *norm + " is protected by '" + doc_.paths.protected_paths[i] + "' but allowed by exception '" +
                          x.path + "' (" + x.reason + ", applied by " + x.applied_by + ")");
      }
    }
    return decide(Outcome::deny, "protected_path", "protected:" + doc_.paths.protected_paths[i],
                  *norm + " is under protected path '" + doc_.paths.protected_paths[i] + "'");
  }
  return decide(Outcome::allow, "", std::nullopt, *norm + " is not protected");
}

DomainTier CompiledPolicy::tier_for(std::string_view host) const {
  std::size_t best = 0;
  DomainTier tier = DomainTier::standard;
  for (const auto& [domain, t] : doc_.network.domain_tiers) {
    const bool match = host == domain || (host.size() > domain.size() && host.ends_with(domain) &&
                                          host[host.size() - domain.size() - 1] == '.');
    if (match && domain.size() > best) {
      best = domain.size();
      tier = t;
    }
  }
  return tier;
}

PolicyDecision CompiledPolicy::check_url(std::string_view url) const {
  const auto parsed = parse_url(url);
  if (!parsed) return decide(Outcome::deny, "url_parse_error", std::nullopt, "URL could not be parsed");
  static const std::set<std::string> kSchemes = {"http", "https", "ws", "wss", "ftp"};
  if (!kSchemes.count(parsed->scheme)) {
    return decide(Outcome::deny, "unsupported_scheme", std::nullopt, "scheme '" + parsed->scheme + "' is not allowed");
  }
  const std::string& host = parsed->host;
  if (host == "localhost" || host.ends_with(".localhost")) {
    return decide(Outcome::deny, "private_network", "private:localhost", "host '" + host + "' is a loopback name");
  }
  const bool needs_brackets = host.find(':') != std::string::npos;
  if (needs_brackets != parsed->host_is_bracketed) {
    return decide(Outcome::deny, "url_parse_error", std::nullopt, "malformed host '" + host + "'");
  }
  if (const auto ip = parse_ip(host)) {
    for (const auto& r : compiled_->ranges) {
      if (r.contains(*ip)) {
        return decide(Outcome::deny, "private_network", "private:" + r.text,
                      "address " + ip->to_string() + " is inside private range " + r.text);
      }
    }
    return decide(Outcome::allow, "", std::nullopt, "address " + ip->to_string() + " is public");
  }
  if (looks_numeric_host(host)) {
    return decide(Outcome::deny, "url_parse_error", std::nullopt, "host '" + host + "' is a malformed address");
  }
  switch (tier_for(host)) {
    case DomainTier::blocked:
      return decide(Outcome::deny, "blocked_domain", "tier:" + host, "host '" + host + "' is in the blocked tier");
    case DomainTier::risky:
      return decide(Outcome::warn, "risky_domain", "tier:" + host, "host '" + host + "' is in the risky tier");
    case DomainTier::trusted:
      return decide(Outcome::allow, "", std::nullopt, "host '" + host + "' is trusted");
    case DomainTier::standard:
      break;
  }
  return decide(Outcome::allow, "", std::nullopt, "host '" + host + "' has the default tier");
}

SecretScan CompiledPolicy::scan_secrets(std::string_view text) const {
  SecretScan out;
  const auto& c = *compiled_;
  for (std::size_t i = 0; i < c.secrets.size(); ++i) {
    boost::cregex_iterator it(text.data(), text.data() + text.size(), c.secrets[i]);
    for (const boost::cregex_iterator end; it != end; ++it) {
      const auto& m = (*it)[0];
      if (m.first == m.second) continue;
      out.findings.push_back({doc_.dlp.secret_patterns[i].id, static_cast<std::size_t>(m.first - text.data()),
                              static_cast<std::size_t>(m.second - text.data())});
    }
  }
  std::sort(out.findings.begin(), out.findings.end(),
            [](const SecretFinding& a, const SecretFinding& b) { return std::tie(a.begin, a.end) < std::tie(b.begin, b.end); });
  if (out.findings.empty()) {
    out.redacted = std::string(text);
    return out;
  }
  std::size_t pos = 0;
  for (std::size_t i = 0; i < out.findings.size();) {
    std::size_t b = out.findings[i].begin;
    std::size_t e = out.findings[i].end;
    for (++i; i < out.findings.size() && out.findings[i].begin < e; ++i) e = std::max(e, out.findings[i].end);
    out.redacted.append(text.substr(pos, b - pos));
    out.redacted += doc_.dlp.mask;
    pos = e;
  }
  out.redacted.append(text.substr(pos));
  return out;
}

bool CompiledPolicy::is_scan_tool(std::string_view tool) const { return compiled_->scan_tools.count(std::string(tool)) > 0; }

bool CompiledPolicy::is_high_risk_tool(std::string_view tool) const {
  return compiled_->high_risk.count(std::string(tool)) > 0;
}

bool CompiledPolicy::tool_allowed(std::string_view caller, std::string_view tool) const {
  const auto it = compiled_->tool_allow.find(caller);
  return it != compiled_->tool_allow.end() && it->second.count(std::string(tool)) > 0;
}

// ---------------------------------------------------------------- engine

PolicyEngine::PolicyEngine(PolicyDocument initial, audit::EventSink* audit)
    : active_(std::make_shared<const CompiledPolicy>(std::move(initial))), audit_(audit) {}

std::uint64_t PolicyEngine::reload(PolicyDocument doc) {
  std::lock_guard<std::mutex> lock(reload_mu_);
  const auto current = active_.load();
  const std::uint64_t requested = doc.revision;
  doc.revision = std::max(current->revision() + 1, doc.revision);
  std::shared_ptr<const CompiledPolicy> next;
  try {
    next = std::make_shared<const CompiledPolicy>(std::move(doc));
  } catch (const PolicyError& e) {
    if (audit_) {
      audit_->record("policy-engine", "policy_reload_rejected", std::nullopt,
                     {{"active_revision", current->revision()}, {"requested_revision", requested},
                      {"problems", e.problems()}});
    }
    throw;
  }
  const auto rev = next->revision();
  active_.store(std::move(next));
  if (audit_) {
    audit_->record("policy-engine", "policy_reloaded", std::nullopt,
                   {{"previous_revision", current->revision()}, {"revision", rev}});
  }
  return rev;
}

std::uint64_t PolicyEngine::reload_file(const std::string& path) {
  PolicyDocument doc;
  try {
    doc = PolicyDocument::load_file(path);
  } catch (const PolicyError& e) {
    if (audit_) {
      audit_->record("policy-engine", "policy_reload_rejected", std::nullopt,
                     {{"active_revision", revision()}, {"path", path}, {"problems", e.problems()}});
    }
    throw;
  }
  return reload(std::move(doc));
}

std::string explain(const PolicyDecision& d) {
  std::string out = std::string(to_string(d.outcome));
  if (!d.reason_code.empty()) out += " [" + d.reason_code + "]";
  out += " rule=" + d.rule_id.value_or("-");
  out += " revision=" + std::to_string(d.revision);
  out += ": " + d.explanation;
  return out;
}

nlohmann::json decision_to_json(const PolicyDecision& d) {
  return {{"outcome", std::string(to_string(d.outcome))},
          {"reason_code", d.reason_code},
          {"rule_id", d.rule_id ? nlohmann::json(*d.rule_id) : nlohmann::json(nullptr)},
          {"explanation", d.explanation},
          {"revision", d.revision}};
}

}  // namespace prism::policy
