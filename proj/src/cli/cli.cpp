#include "prism/cli/cli.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "prism/audit/audit_log.hpp"
#include "prism/bench/bench.hpp"
#include "prism/config/config.hpp"
#include "prism/monitor/monitor.hpp"
#include "prism/net/http.hpp"
#include "prism/policy/policy.hpp"
#include "prism/proxy/proxy.hpp"
#include "prism/scanner/server.hpp"

namespace prism::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr auto kProbeTimeout = std::chrono::seconds(2);
constexpr int kDashboardPort = 18768;

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  bool json = false;
};

config::PluginConfig load_config(const Globals& g) {
  if (g.config_path.empty()) return config::PluginConfig::defaults();
  return config::PluginConfig::load_file(g.config_path);
}

std::string audit_key(const config::PluginConfig& c) {
  auto key = audit::load_key(c.audit.key_env, c.audit.key_file);
  if (!key) throw UsageError("no audit key: set " + c.audit.key_env + " or audit.key_file");
  return *key;
}

audit::AnchorOptions anchor_options(const config::PluginConfig& c) {
  audit::AnchorOptions o;
  o.anchor_interval = c.audit.anchor_interval;
  return o;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- status

struct Probe {
  std::string name;
  bool enabled = false;
  bool reachable = false;
  std::string state;  // up, unreachable, disabled, not probed
  json health;
  std::string detail;
};

Probe make_probe(std::string name, bool enabled, bool reachable = false, std::string state = "") {
  Probe p;
  p.name = std::move(name);
  p.enabled = enabled;
  p.reachable = reachable;
  p.state = std::move(state);
  return p;
}

Probe probe_http(std::string name, const std::string& base_url) {
  Probe p = make_probe(std::move(name), true);
  const auto r = net::http_call("GET", base_url + "/health", "", {}, kProbeTimeout);
  if (r.ok && r.status == 200) {
    p.reachable = true;
    p.state = "up";
    p.health = json::parse(r.body, nullptr, false);
    if (p.health.is_discarded()) p.health = nullptr;
  } else {
    p.state = "unreachable";
    p.detail = r.ok ? "HTTP " + std::to_string(r.status) : (r.timed_out ? "timed out" : r.error);
  }
  return p;
}

std::string loopback(const std::string& host, int port) { return "http://" + host + ":" + std::to_string(port); }

std::vector<Probe> probe_all(const config::PluginConfig& c) {
  using config::Component;
  std::vector<std::future<Probe>> pending;
  std::vector<Probe> out;
  auto gated = [&](Component comp, std::function<Probe()> fn) {
    if (!config::component_enabled(comp)) {
      Probe p = make_probe(std::string(config::to_string(comp)), false, false, "disabled");
      pending.push_back(std::async(std::launch::deferred, [p] { return p; }));
    } else {
      pending.push_back(std::async(std::launch::async, std::move(fn)));
    }
  };
  gated(Component::scanner, [&] { return probe_http("scanner", c.scanner.url); });
  gated(Component::proxy, [&] { return probe_http("proxy", loopback(c.proxy.host, c.proxy.port)); });
  gated(Component::monitor, [] {
    Probe p = make_probe("monitor", true, true, "not probed");
    p.detail = "runs inside the start process; no network endpoint";
    return p;
  });
  gated(Component::dashboard, [] { return probe_http("dashboard", loopback("127.0.0.1", kDashboardPort)); });
  for (auto& f : pending) out.push_back(f.get());
  return out;
}

json probe_to_json(const Probe& p) {
  json j = {{"name", p.name}, {"enabled", p.enabled}, {"reachable", p.reachable}, {"state", p.state}};
  if (p.health.is_object()) {
    if (p.health.contains("policy_revision")) j["revision"] = p.health["policy_revision"];
    if (p.health.contains("model_mode")) j["mode"] = p.health["model_mode"];
  }
  if (!p.detail.empty()) j["detail"] = p.detail;
  return j;
}

int cmd_status(const Globals& g, std::ostream& out) {
  const auto cfg = load_config(g);
  const auto probes = probe_all(cfg);
  bool ok = true;
  for (const auto& p : probes) ok = ok && (!p.enabled || p.reachable);
  if (g.json) {
    json j = {{"ok", ok}, {"components", json::array()}};
    for (const auto& p : probes) j["components"].push_back(probe_to_json(p));
    out << j.dump(2) << "\n";
  } else {
    for (const auto& p : probes) {
      const auto j = probe_to_json(p);
      out << std::left << std::setw(10) << p.name << " " << p.state;
      if (j.contains("revision")) out << "  revision " << j["revision"].dump();
      if (j.contains("mode")) out << "  mode " << j["mode"].get<std::string>();
      if (!p.detail.empty()) out << "  (" << p.detail << ")";
      out << "\n";
    }
  }
  return ok ? kOk : kFailed;
}

// ---------------------------------------------------------------- audit

int cmd_audit_tail(const Globals& g, std::ostream& out, std::string log_path, std::size_t n) {
  const auto cfg = load_config(g);
  if (log_path.empty()) log_path = cfg.audit.log_path;
  if (!fs::exists(log_path)) throw UsageError("audit log not found: " + log_path);
  const auto entries = audit::tail(log_path, n);
  if (g.json) {
    json arr = json::array();
    for (const auto& e : entries) arr.push_back(audit::entry_to_json(e));
    out << arr.dump(2) << "\n";
    return kOk;
  }
  for (const auto& e : entries) {
    out << std::setw(6) << e.seq << "  " << e.timestamp << "  " << e.actor << "  " << e.event_type;
    if (e.session) out << "  session=" << *e.session;
    out << "  " << e.payload.dump() << "\n";
  }
  return kOk;
}

int cmd_audit_verify(const Globals& g, std::ostream& out, std::string log_path, bool anchors) {
  const auto cfg = load_config(g);
  if (log_path.empty()) log_path = cfg.audit.log_path;
  if (!fs::exists(log_path)) throw UsageError("audit log not found: " + log_path);
  const auto key = audit_key(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = anchors ? audit::verify_with_anchors_file(log_path, key, anchor_options(cfg))
                           : audit::verify_chain_file(log_path, key);
  const double elapsed = ms_since(t0);
  if (g.json) {
    json j = {{"ok", rep.ok},
              {"mode", anchors ? "anchors" : "chain"},
              {"entries_checked", rep.entries_checked},
              {"anchors_checked", rep.anchors_checked},
              {"elapsed_ms", elapsed},
              {"first_break", nullptr}};
    if (rep.first_break) {
      j["first_break"] = {{"seq", rep.first_break->seq},
                          {"failure", std::string(audit::to_string(rep.first_break->failure))},
                          {"detail", rep.first_break->detail}};
    }
    out << j.dump(2) << "\n";
  } else if (rep.ok) {
    out << "ok: " << rep.entries_checked << " entries";
    if (anchors) out << ", " << rep.anchors_checked << " anchors";
    out << " verified in " << std::fixed << std::setprecision(2) << elapsed << " ms\n";
  } else {
    out << "FAILED at seq " << rep.first_break->seq << ": " << audit::to_string(rep.first_break->failure) << " ("
        << rep.first_break->detail << ")\n";
  }
  return rep.ok ? kOk : kFailed;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Globals& g, std::ostream& out, const std::string& policy_file, const std::string& action) {
  policy::PolicyDocument doc;
  if (!policy_file.empty()) {
    std::ifstream in(policy_file);
    if (!in) throw UsageError("cannot open policy file " + policy_file);
    const auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw UsageError(policy_file + " is not valid JSON");
    doc = policy::PolicyDocument::from_json(j);
  } else {
    doc = load_config(g).policy;
  }
  const policy::CompiledPolicy p(std::move(doc));

  const auto colon = action.find(':');
  if (colon == std::string::npos) throw UsageError("action must look like 'exec: <command>', 'path: ...', 'url: ...' or 'text: ...'");
  std::string kind = action.substr(0, colon);
  std::string arg = action.substr(colon + 1);
  while (!arg.empty() && arg.front() == ' ') arg.erase(arg.begin());

  if (kind == "text" || kind == "dlp") {
    const auto s = p.scan_secrets(arg);
    const bool blocked = !s.findings.empty();
    json ids = json::array();
    for (const auto& f : s.findings) ids.push_back(f.pattern_id);
    if (g.json) {
      out << json{{"check", "dlp"},
                  {"outcome", blocked ? "deny" : "allow"},
                  {"reason_code", blocked ? "secret_detected" : ""},
                  {"rule_id", blocked ? json(ids[0]) : json(nullptr)},
                  {"patterns", ids},
                  {"redacted", s.redacted},
                  {"revision", p.revision()}}
                 .dump(2)
          << "\n";
    } else {
      out << (blocked ? "deny" : "allow") << "  revision " << p.revision();
      if (blocked) out << "  patterns " << ids.dump();
      out << "\n" << s.redacted << "\n";
    }
    return blocked ? kFailed : kOk;
  }

  policy::PolicyDecision d;
  if (kind == "exec") {
    d = p.check_exec(arg);
  } else if (kind == "path") {
    d = p.check_path(arg);
  } else if (kind == "url") {
    d = p.check_url(arg);
  } else {
    throw UsageError("unknown action kind '" + kind + "' (exec, path, url, text)");
  }
  if (g.json) {
    auto j = policy::decision_to_json(d);
    j["check"] = kind;
    out << j.dump(2) << "\n";
  } else {
    out << policy::explain(d) << "\n";
  }
  return d.denied() ? kFailed : kOk;
}

// ---------------------------------------------------------------- services

volatile std::sig_atomic_t g_installed = 0;

void install_signals() {
  if (g_installed) return;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  g_installed = 1;
}

// Everything one `start`/`serve` process runs.
class Stack {
 public:
  Stack(const config::PluginConfig& cfg, std::ostream& out) : cfg_(cfg), out_(out) {}

  void open_audit() {
    if (audit_) return;
    audit::AuditLogOptions o;
    o.key = audit_key(cfg_);
    o.anchor_interval = cfg_.audit.anchor_interval;
    audit_ = audit::AuditLog::open(cfg_.audit.log_path, o);
  }

  void start_scanner() {
    const auto token = cfg_.scanner.resolved_token();
    if (token.empty()) throw UsageError("scanner token missing: set " + cfg_.scanner.token_env + " or scanner.token");
    service_ = std::make_unique<scanner::ScannerService>(std::make_shared<scan::HeuristicScanner>(),
                                                         scanner::make_judge(cfg_.scanner.model),
                                                         scanner::ScannerConfig{token});
    scanner_server_ = std::make_unique<scanner::ScannerServer>(*service_);
    const int port = scanner_server_->start(cfg_.scanner.host, cfg_.scanner.port);
    out_ << "scanner listening on " << cfg_.scanner.host << ":" << port << " (model "
         << scanner::to_string(cfg_.scanner.model.mode) << ")\n";
  }

  void start_proxy() {
    open_audit();
    if (cfg_.proxy.callers.empty()) throw UsageError("proxy.callers is empty; no caller could authenticate");
    policy_ = std::make_unique<policy::PolicyEngine>(cfg_.policy, audit_.get());
    upstream_ = std::make_unique<proxy::HttpUpstream>(cfg_.proxy.upstream_url, cfg_.proxy.upstream_timeout);
    proxy::ProxyOptions o;
    o.callers = cfg_.proxy.callers;
    o.ownership_ttl = cfg_.proxy.ownership_ttl;
    o.policy_file = cfg_.policy_file;
    proxy_ = std::make_unique<proxy::InvokeProxy>(*policy_, o, *upstream_, *audit_);
    proxy_server_ = std::make_unique<proxy::ProxyServer>(*proxy_);
    const int port = proxy_server_->start(cfg_.proxy.host, cfg_.proxy.port);
    out_ << "proxy listening on " << cfg_.proxy.host << ":" << port << " -> " << cfg_.proxy.upstream_url << "\n";
  }

  void start_upstream(int port) {
    echo_ = std::make_unique<proxy::EchoUpstreamServer>();
    const int bound = echo_->start("127.0.0.1", port);
    out_ << "echo upstream listening on 127.0.0.1:" << bound << "\n";
  }

  void start_monitor() {
    open_audit();
    std::vector<std::string> paths = cfg_.monitor.paths;
    if (paths.empty() && !cfg_.policy_file.empty()) paths.push_back(cfg_.policy_file);
    if (paths.empty()) throw UsageError("monitor.paths is empty; nothing to watch");
    monitor_ = std::make_unique<monitor::FileMonitor>(paths, *audit_);
    runner_ = std::make_unique<monitor::MonitorRunner>(*monitor_, cfg_.monitor.poll_interval);
    out_ << "monitor watching " << paths.size() << " path(s) every " << cfg_.monitor.poll_interval.count() << " ms\n";
  }

  void wait(std::chrono::milliseconds duration) {
    out_.flush();
    const auto until = std::chrono::steady_clock::now() + duration;
    while (!g_stop && (duration.count() == 0 || std::chrono::steady_clock::now() < until)) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    g_stop = false;
  }

  ~Stack() {
    runner_.reset();
    if (proxy_server_) proxy_server_->stop();
    if (scanner_server_) scanner_server_->stop();
    if (echo_) echo_->stop();
  }

 private:
  const config::PluginConfig& cfg_;
  std::ostream& out_;
  std::unique_ptr<audit::AuditLog> audit_;
  std::unique_ptr<scanner::ScannerService> service_;
  std::unique_ptr<scanner::ScannerServer> scanner_server_;
  std::unique_ptr<policy::PolicyEngine> policy_;
  std::unique_ptr<proxy::Upstream> upstream_;
  std::unique_ptr<proxy::InvokeProxy> proxy_;
  std::unique_ptr<proxy::ProxyServer> proxy_server_;
  std::unique_ptr<proxy::EchoUpstreamServer> echo_;
  std::unique_ptr<monitor::FileMonitor> monitor_;
  std::unique_ptr<monitor::MonitorRunner> runner_;
};

int upstream_port(const config::PluginConfig& cfg) {
  const auto colon = cfg.proxy.upstream_url.rfind(':');
  if (colon == std::string::npos) return proxy::EchoUpstreamServer::kDefaultPort;
  return std::atoi(cfg.proxy.upstream_url.c_str() + colon + 1);
}

int cmd_start(const Globals& g, std::ostream& out, bool with_upstream, std::int64_t duration_ms) {
  using config::Component;
  const auto cfg = load_config(g);
  install_signals();
  Stack stack(cfg, out);
  int started = 0;
  if (config::component_enabled(Component::scanner)) {
    stack.start_scanner();
    ++started;
  } else {
    out << "scanner disabled (" << config::env_var(Component::scanner) << ")\n";
  }
  if (config::component_enabled(Component::proxy)) {
    if (with_upstream) stack.start_upstream(upstream_port(cfg));
    stack.start_proxy();
    ++started;
  } else {
    out << "proxy disabled (" << config::env_var(Component::proxy) << ")\n";
  }
  if (config::component_enabled(Component::monitor)) {
    stack.start_monitor();
    ++started;
  } else {
    out << "monitor disabled (" << config::env_var(Component::monitor) << ")\n";
  }
  if (config::component_enabled(Component::dashboard)) {
    out << "dashboard requested but not part of this build; skipped\n";
  }
  if (started == 0) {
    out << "nothing to start\n";
    return kOk;
  }
  stack.wait(std::chrono::milliseconds(duration_ms));
  return kOk;
}

int cmd_serve(const Globals& g, std::ostream& out, const std::string& component, std::int64_t duration_ms) {
  const auto cfg = load_config(g);
  install_signals();
  Stack stack(cfg, out);
  if (component == "scanner") {
    stack.start_scanner();
  } else if (component == "proxy") {
    stack.start_proxy();
  } else if (component == "monitor") {
    stack.start_monitor();
  } else if (component == "upstream") {
    stack.start_upstream(upstream_port(cfg));
  } else {
    throw UsageError("unknown component " + component);
  }
  stack.wait(std::chrono::milliseconds(duration_ms));
  return kOk;
}

// ---------------------------------------------------------------- verify-install

int cmd_verify_install(const Globals& g, std::ostream& out) {
  ordered_json checks = ordered_json::array();
  bool ok = true;
  auto check = [&](const std::string& name, bool pass, const std::string& detail) {
    checks.push_back({{"check", name}, {"ok", pass}, {"detail", detail}});
    ok = ok && pass;
  };

  config::PluginConfig cfg;
  try {
    cfg = load_config(g);
    check("config", true, g.config_path.empty() ? "built-in defaults" : g.config_path);
  } catch (const std::exception& e) {
    check("config", false, e.what());
  }
  if (ok) {
    try {
      const policy::CompiledPolicy p(cfg.policy);
      check("policy", true, "revision " + std::to_string(p.revision()));
    } catch (const std::exception& e) {
      check("policy", false, e.what());
    }

    const auto key = audit::load_key(cfg.audit.key_env, cfg.audit.key_file);
    if (!key) {
      check("audit_key", false, "set " + cfg.audit.key_env + " or audit.key_file");
    } else {
      check("audit_key", true, "present");
      const auto dir = fs::temp_directory_path() / ("prism-verify-" + std::to_string(::getpid()));
      fs::create_directories(dir);
      const auto log_path = (dir / "roundtrip.jsonl").string();
      try {
        {
          audit::AuditLogOptions o;
          o.key = *key;
          o.anchor_interval = cfg.audit.anchor_interval;
          auto log = audit::AuditLog::open(log_path, o);
          log->append("cli", "install_verified", std::nullopt, {{"probe", true}});
        }
        const auto rep = audit::verify_with_anchors_file(log_path, *key, anchor_options(cfg));
        check("audit_roundtrip", rep.ok, rep.ok ? "1 entry written and verified" : "written entry did not verify");
      } catch (const std::exception& e) {
        check("audit_roundtrip", false, e.what());
      }
      fs::remove_all(dir);

      if (!cfg.monitor.manifest_path.empty()) {
        std::ifstream in(cfg.monitor.manifest_path);
        if (!in) {
          check("manifest", false, cfg.monitor.manifest_path + " not found (run `prism manifest` first)");
        } else {
          const auto rep = monitor::reconcile(json::parse(in, nullptr, false), *key);
          check("manifest", rep.ok(), rep.to_json().dump());
        }
      }
    }

    try {
      for (const auto& p : probe_all(cfg)) {
        if (!p.enabled) {
          check("health:" + p.name, true, "disabled");
        } else {
          check("health:" + p.name, p.reachable, p.state + (p.detail.empty() ? "" : " (" + p.detail + ")"));
        }
      }
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }

  if (g.json) {
    out << ordered_json{{"ok", ok}, {"checks", checks}}.dump(2) << "\n";
  } else {
    for (const auto& c : checks) {
      out << (c["ok"].get<bool>() ? "[ok]   " : "[FAIL] ") << c["check"].get<std::string>() << "  "
          << c["detail"].get<std::string>() << "\n";
    }
  }
  return ok ? kOk : kFailed;
}

int cmd_manifest(const Globals& g, std::ostream& out, std::string path) {
  const auto cfg = load_config(g);
  if (path.empty()) path = cfg.monitor.manifest_path;
  if (path.empty()) throw UsageError("no manifest path: pass --out or set monitor.manifest_path");
  if (cfg.monitor.paths.empty()) throw UsageError("monitor.paths is empty");
  const auto manifest = monitor::make_manifest(cfg.monitor.paths, audit_key(cfg));
  std::ofstream(path, std::ios::trunc) << manifest.dump(2) << "\n";
  out << "wrote manifest for " << cfg.monitor.paths.size() << " path(s) to " << path << "\n";
  return kOk;
}

// ---------------------------------------------------------------- run-benchmark

struct BenchFlags {
  std::string engines = "all";
  std::vector<std::string> corpus_dirs;
  std::string env_dir;
  std::string scanner_mode = "mock";
  std::string model_label;
  std::string endpoint;
  std::int64_t timeout_ms = 20000;
  std::string out_dir = "bench-results";
  bool ladder = true;
};

int cmd_run_benchmark(const Globals& g, std::ostream& out, const BenchFlags& f) {
  std::vector<bench::EngineId> engines;
  if (f.engines == "all") {
    engines.assign(std::begin(bench::kAllEngines), std::end(bench::kAllEngines));
  } else {
    std::stringstream ss(f.engines);
    std::string name;
    while (std::getline(ss, name, ',')) {
      const auto e = bench::engine_from_string(name);
      if (!e) throw UsageError("unknown engine '" + name + "'");
      engines.push_back(*e);
    }
  }
  const auto mode = scanner::model_mode_from_string(f.scanner_mode);
  if (!mode) throw UsageError("--scanner-mode must be live, mock or disabled");

  std::vector<std::string> dirs = f.corpus_dirs;
  if (dirs.empty()) dirs.push_back("corpus");
  const std::string env_dir = f.env_dir.empty() ? (fs::path(dirs.front()) / "env").string() : f.env_dir;

  bench::BenchOptions opts;
  opts.model.mode = *mode;
  if (!f.model_label.empty()) opts.model.model_label = f.model_label;
  if (!f.endpoint.empty()) opts.model.endpoint = f.endpoint;
  opts.model.timeout = std::chrono::milliseconds(f.timeout_ms);

  std::vector<bench::BenchCase> cases;
  try {
    cases = bench::load_corpus(dirs);
  } catch (const bench::CorpusError& e) {
    out << e.what() << "\n";
    return kFailed;
  }
  const auto env = fs::exists(env_dir) ? bench::BenchEnv::load(env_dir) : bench::BenchEnv{};

  std::vector<bench::EngineReport> reports;
  for (auto e : engines) reports.push_back(bench::run_engine(e, cases, env, opts));
  std::vector<bench::EngineReport> ladder;
  if (f.ladder) ladder = bench::run_ladder(cases, env, opts);

  const auto report = bench::report_to_json(cases, reports, ladder);
  const auto summary = bench::summary_table(reports, ladder);
  bench::emit_report(f.out_dir, report, summary);
  if (g.json) {
    out << report.dump(2) << "\n";
  } else {
    out << summary << "\nreport written to " << (fs::path(f.out_dir) / "report.json").string() << "\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"prism: runtime security layer for agent gateways", "prism"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config_path, "plugin config file")->check(CLI::ExistingFile);
  app.add_flag("--json", g.json, "machine-readable output");

  bool with_upstream = false;
  std::int64_t duration_ms = 0;
  auto* start = app.add_subcommand("start", "start the components enabled by PRISM_*_START");
  start->add_flag("--with-upstream", with_upstream, "also run the echo upstream tool executor");
  start->add_option("--duration-ms", duration_ms, "stop after this long (0: run until signalled)");

  std::string component;
  auto* serve = app.add_subcommand("serve", "run a single component in the foreground");
  serve->add_option("component", component, "scanner, proxy, monitor or upstream")
      ->required()
      ->check(CLI::IsMember({"scanner", "proxy", "monitor", "upstream"}));
  serve->add_option("--duration-ms", duration_ms, "stop after this long (0: run until signalled)");

  auto* status = app.add_subcommand("status", "probe component health");

  auto* audit_cmd = app.add_subcommand("audit", "inspect the audit log");
  audit_cmd->require_subcommand(1);
  std::string log_path;
  std::size_t tail_n = 20;
  bool anchors = false;
  auto* tail = audit_cmd->add_subcommand("tail", "print the last entries");
  tail->add_option("-n,--lines", tail_n, "number of entries");
  tail->add_option("--log", log_path, "audit log path (default from config)");
  auto* verify = audit_cmd->add_subcommand("verify", "verify the hash chain");
  verify->add_option("--log", log_path, "audit log path (default from config)");
  verify->add_flag("--anchors", anchors, "also check anchor records and the head record");

  std::string policy_file, action;
  auto* simulate = app.add_subcommand("simulate", "evaluate a policy check offline");
  simulate->add_option("--policy", policy_file, "policy document (default: config policy)");
  simulate->add_option("action", action, "'exec: ...', 'path: ...', 'url: ...' or 'text: ...'")->required();

  auto* verify_install = app.add_subcommand("verify-install", "check config, audit round trip and health");

  std::string manifest_out;
  auto* manifest = app.add_subcommand("manifest", "write a signed hash manifest of the monitored files");
  manifest->add_option("--out", manifest_out, "manifest path (default monitor.manifest_path)");

  BenchFlags bf;
  bool no_ladder = false;
  auto* bench_cmd = app.add_subcommand("run-benchmark", "run the evaluation engines over a corpus");
  bench_cmd->add_option("--engines", bf.engines, "comma-separated engine ids or 'all'");
  bench_cmd->add_option("--corpus-dir", bf.corpus_dirs, "corpus directory (repeatable)");
  bench_cmd->add_option("--env-dir", bf.env_dir, "policy/proxy environment (default <corpus>/env)");
  bench_cmd->add_option("--scanner-mode", bf.scanner_mode, "live, mock or disabled");
  bench_cmd->add_option("--model-label", bf.model_label, "model label recorded in the run metadata");
  bench_cmd->add_option("--endpoint", bf.endpoint, "model endpoint for live mode");
  bench_cmd->add_option("--timeout", bf.timeout_ms, "model timeout in ms");
  bench_cmd->add_option("--out", bf.out_dir, "results directory");
  bench_cmd->add_flag("--no-ladder", no_ladder, "skip the baseline ladder");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*start) return cmd_start(g, out, with_upstream, duration_ms);
    if (*serve) return cmd_serve(g, out, component, duration_ms);
    if (*status) return cmd_status(g, out);
    if (*tail) return cmd_audit_tail(g, out, log_path, tail_n);
    if (*verify) return cmd_audit_verify(g, out, log_path, anchors);
    if (*simulate) return cmd_simulate(g, out, policy_file, action);
    if (*verify_install) return cmd_verify_install(g, out);
    if (*manifest) return cmd_manifest(g, out, manifest_out);
    if (*bench_cmd) {
      bf.ladder = !no_ladder;
      return cmd_run_benchmark(g, out, bf);
    }
  } catch (const UsageError& e) {
    err << "prism: " << e.what() << "\n";
    return kUsage;
  } catch (const config::ConfigError& e) {
    err << "prism: invalid config\n";
    for (const auto& p : e.problems()) err << "  " << p << "\n";
    return kUsage;
  } catch (const policy::PolicyError& e) {
    err << "prism: invalid policy\n";
    for (const auto& p : e.problems()) err << "  " << p << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "prism: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "prism: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}

}  // namespace prism::cli
