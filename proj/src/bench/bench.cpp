#include "prism/bench/bench.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "prism/hooks/scenario.hpp"
#include "prism/proxy/proxy.hpp"
#include "prism/scanner/client.hpp"

namespace prism::bench {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kInternalToken = "bench-internal-scanner-token";

std::string kind_for_suite(const std::string& suite) {
  if (suite == "plugin_flow") return "plugin_flow";
  if (suite == "tool_abuse" || suite == "benign_tool_use") return "invoke_policy";
  return "scan_text";
}

// Label forced by the family, or "" when the family mixes both.
std::string label_for_suite(const std::string& suite) {
  static const std::set<std::string> attacks = {"direct_injection", "indirect_injection", "exfiltration", "tool_abuse"};
  static const std::set<std::string> benign = {"benign_chat", "benign_web", "benign_tool_use", "keyword_controls"};
  if (attacks.count(suite)) return "attack";
  if (benign.count(suite)) return "benign";
  return "";
}

std::optional<std::string> check_request(const json& r) {
  if (!r.is_object()) return "request must be an object";
  for (const char* key : {"caller_id", "session_id", "tool"}) {
    if (!r.contains(key) || !r[key].is_string() || r[key].get<std::string>().empty()) {
      return std::string("request.") + key + " must be a non-empty string";
    }
  }
  if (r.contains("args") && !r["args"].is_object()) return "request.args must be an object";
  if (r.contains("token") && !r["token"].is_string()) return "request.token must be a string";
  return std::nullopt;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Usage {
  double cpu_ms;
  long max_rss_kb;
};

Usage usage_now() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  const double cpu = (ru.ru_utime.tv_sec + ru.ru_stime.tv_sec) * 1e3 + (ru.ru_utime.tv_usec + ru.ru_stime.tv_usec) / 1e3;
  return {cpu, ru.ru_maxrss};
}

json opt_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt(const std::optional<double>& v, int digits = 3) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << *v;
  return s.str();
}

// Everything one engine run shares across its cases.
class EngineRunner {
 public:
  EngineRunner(EngineId engine, const BenchEnv& env, const BenchOptions& options)
      : engine_(engine), env_(env), options_(options), policy_(env.policy) {
    if (engine == EngineId::scanner || engine == EngineId::plugin_scanner || engine == EngineId::full_prism) {
      service_ = std::make_unique<scanner::ScannerService>(heuristics_, scanner::make_judge(options.model),
                                                           scanner::ScannerConfig{std::string(kInternalToken)});
      client_ = std::make_unique<scanner::InProcessScanClient>(*service_, std::string(kInternalToken));
    }
  }

  CaseOutcome run(const BenchCase& c) {
    CaseOutcome out{c.id, c.attack, false, true, "", {}};
    switch (engine_) {
      case EngineId::no_prism: out.detail = "forwarded"; break;
      case EngineId::heuristics_only: heuristics_only(c, out); break;
      case EngineId::heuristic: heuristic(c, out); break;
      case EngineId::scanner: scanner_engine(c, out); break;
      case EngineId::proxy_policy: proxy_case(c, out); break;
      case EngineId::plugin_only: plugin_case(c, out, nullptr); break;
      case EngineId::plugin_scanner: plugin_case(c, out, client_.get()); break;
      case EngineId::full_prism:
        if (c.kind == Kind::invoke_policy) {
          proxy_case(c, out);
        } else {
          plugin_case(c, out, client_.get());
        }
        break;
    }
    return out;
  }

  std::map<std::string, std::uint64_t> scan_paths() const {
    if (!service_) return {};
    const auto t = service_->telemetry();
    return {{"heuristic_shortcircuit", t.shortcircuit}, {"model_assisted", t.model_assisted},
            {"heuristic_fallback", t.fallback}};
  }

 private:
  void heuristics_only(const BenchCase& c, CaseOutcome& out) {
    const auto s = scan::score_plain(*c.probe, *heuristics_->rules());
    const auto v = scan::classify(s, heuristics_->config().thresholds);
    out.blocked = v != scan::Verdict::benign;
    out.detail = "score " + std::to_string(s.clamped_score);
  }

  void heuristic(const BenchCase& c, CaseOutcome& out) {
    const auto r = heuristics_->scan(c.payload["text"].get<std::string>(), scan::Origin::tool_result);
    out.blocked = r.verdict != scan::Verdict::benign;
    out.detail = std::string(scan::to_string(r.verdict)) + " (" + std::to_string(r.score.clamped_score) + ")";
  }

  void scanner_engine(const BenchCase& c, CaseOutcome& out) {
    scanner::ScanRequest req;
    req.text = c.payload["text"].get<std::string>();
    req.auth_token = std::string(kInternalToken);
    req.metadata.mock_verdict = c.scanner_annotation;
    const auto r = service_->handle_scan(req);
    out.blocked = r.verdict != scan::Verdict::benign;
    out.detail = std::string(scan::to_string(r.verdict)) + " via " + std::string(scanner::to_string(r.path));
  }

  void proxy_case(const BenchCase& c, CaseOutcome& out) {
    proxy::EchoUpstream upstream;
    audit::NullSink sink;
    proxy::ProxyOptions opts;
    opts.callers = env_.callers;
    proxy::InvokeProxy proxy(policy_, opts, upstream, sink);
    auto to_request = [&](const json& r) {
      proxy::InvokeRequest req;
      req.caller_id = r["caller_id"].get<std::string>();
      req.session_id = r["session_id"].get<std::string>();
      req.tool = r["tool"].get<std::string>();
      req.args = r.value("args", json::object());
      req.auth_token = r.contains("token") ? r["token"].get<std::string>() : env_.token_for(req.caller_id).value_or("");
      return req;
    };
    for (const auto& s : c.payload.value("setup", json::array())) proxy.invoke(to_request(s));
    const auto r = proxy.invoke(to_request(c.payload["request"]));
    out.blocked = r.outcome == proxy::Outcome::denied;
    out.detail = r.deny_reason ? std::string(proxy::to_string(*r.deny_reason)) : "forwarded";
  }

  void plugin_case(const BenchCase& c, CaseOutcome& out, scanner::ScanClient* client) {
    risk::RiskEngine risk;
    audit::NullSink sink;
    hooks::Gateway gw(heuristics_, policy_, risk, client, sink);
    const auto run = hooks::run_scenario(gw, hooks::parse_scenario(c.payload));
    out.blocked = run.blocked();
    out.detail = "proceed";
    for (const auto& s : run.steps) {
      if (s.outcome.action == hooks::Action::block) {
        out.detail = std::string(hooks::to_string(s.hook)) + ":" + s.outcome.reason_code.value_or("");
        break;
      }
    }
  }

  EngineId engine_;
  const BenchEnv& env_;
  const BenchOptions& options_;
  policy::PolicyEngine policy_;
  std::shared_ptr<const scan::HeuristicScanner> heuristics_ = std::make_shared<scan::HeuristicScanner>();
  std::unique_ptr<scanner::ScannerService> service_;
  std::unique_ptr<scanner::InProcessScanClient> client_;
};

}  // namespace

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::scan_text: return "scan_text";
    case Kind::invoke_policy: return "invoke_policy";
    case Kind::plugin_flow: return "plugin_flow";
  }
  return "scan_text";
}

CorpusError::CorpusError(std::string what, std::vector<std::string> offending)
    : std::runtime_error(std::move(what)), offending_(std::move(offending)) {}

BenchCase parse_case(const json& j, const std::string& source) {
  auto fail = [&](const std::string& id, const std::string& why) {
    throw CorpusError((id.empty() ? source : id) + ": " + why, {id.empty() ? source : id});
  };
  if (!j.is_object()) fail("", "case must be an object");
  BenchCase c;
  c.source = source;
  c.id = j.value("id", std::string());
  if (c.id.empty()) fail("", "id is required");
  c.suite = j.value("suite", std::string());
  if (std::find(kSuites.begin(), kSuites.end(), c.suite) == kSuites.end()) fail(c.id, "unknown suite '" + c.suite + "'");

  const std::string kind = j.value("kind", std::string());
  if (kind == "scan_text") {
    c.kind = Kind::scan_text;
  } else if (kind == "invoke_policy") {
    c.kind = Kind::invoke_policy;
  } else if (kind == "plugin_flow") {
    c.kind = Kind::plugin_flow;
  } else {
    fail(c.id, "unknown kind '" + kind + "'");
  }
  if (kind != kind_for_suite(c.suite)) fail(c.id, "suite " + c.suite + " holds " + kind_for_suite(c.suite) + " cases");

  const std::string label = j.value("label", std::string());
  if (label != "attack" && label != "benign") fail(c.id, "label must be attack or benign");
  if (const auto forced = label_for_suite(c.suite); !forced.empty() && forced != label) {
    fail(c.id, "suite " + c.suite + " only holds " + forced + " cases");
  }
  c.attack = label == "attack";

  if (!j.contains("expected") || !j["expected"].is_object()) fail(c.id, "expected is required");
  c.expected = j["expected"];
  const std::string want = c.expected.value("outcome", std::string());
  if (want != "block" && want != "allow") fail(c.id, "expected.outcome must be block or allow");
  if ((want == "block") != c.attack) fail(c.id, "expected.outcome disagrees with the label");

  if (j.contains("scanner_annotation")) {
    const auto v = j["scanner_annotation"].is_string()
                       ? scan::verdict_from_string(j["scanner_annotation"].get<std::string>())
                       : std::nullopt;
    if (!v) fail(c.id, "scanner_annotation must be a verdict");
    c.scanner_annotation = v;
  }

  if (!j.contains("payload") || !j["payload"].is_object()) fail(c.id, "payload must be an object");
  c.payload = j["payload"];
  if (j.contains("probe")) {
    if (!j["probe"].is_string()) fail(c.id, "probe must be a string");
    c.probe = j["probe"].get<std::string>();
  }

  switch (c.kind) {
    case Kind::scan_text:
      if (!c.payload.contains("text") || !c.payload["text"].is_string()) fail(c.id, "payload.text must be a string");
      if (!c.probe) c.probe = c.payload["text"].get<std::string>();
      break;
    case Kind::invoke_policy:
      if (auto err = check_request(c.payload.value("request", json())); err) fail(c.id, *err);
      if (c.payload.contains("setup")) {
        if (!c.payload["setup"].is_array()) fail(c.id, "payload.setup must be an array");
        for (const auto& s : c.payload["setup"]) {
          if (auto err = check_request(s); err) fail(c.id, "setup " + *err);
        }
      }
      break;
    case Kind::plugin_flow:
      try {
        hooks::parse_scenario(c.payload);
      } catch (const hooks::ScenarioError& e) {
        fail(c.id, std::string("scenario: ") + e.what());
      }
      break;
  }
  if (!c.probe) fail(c.id, "probe is required for " + kind + " cases");
  return c;
}

std::vector<BenchCase> load_corpus(const std::vector<std::string>& dirs) {
  std::vector<fs::path> files;
  for (const auto& d : dirs) {
    if (!fs::is_directory(d)) throw CorpusError("corpus directory not found: " + d, {d});
    for (auto it = fs::recursive_directory_iterator(d); it != fs::recursive_directory_iterator(); ++it) {
      if (it->is_directory() && it->path().filename() == "env") {
        it.disable_recursion_pending();
        continue;
      }
      if (it->is_regular_file() && it->path().extension() == ".json") files.push_back(it->path());
    }
  }
  std::sort(files.begin(), files.end());

  std::vector<BenchCase> cases;
  std::vector<std::string> offending, problems;
  std::set<std::string> seen;
  for (const auto& f : files) {
    const auto j = json::parse(read_file(f), nullptr, false);
    if (j.is_discarded()) {
      offending.push_back(f.string());
      problems.push_back(f.string() + ": not valid JSON");
      continue;
    }
    try {
      auto c = parse_case(j, f.string());
      if (!seen.insert(c.id).second) throw CorpusError(c.id + ": duplicate id", {c.id});
      cases.push_back(std::move(c));
    } catch (const CorpusError& e) {
      offending.insert(offending.end(), e.offending().begin(), e.offending().end());
      problems.push_back(e.what());
    }
  }
  if (!offending.empty()) {
    std::string msg = "invalid corpus cases:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw CorpusError(msg, offending);
  }
  return cases;
}

std::map<std::string, std::size_t> suite_counts(const std::vector<BenchCase>& cases) {
  std::map<std::string, std::size_t> out;
  for (const auto& s : kSuites) out[s] = 0;
  for (const auto& c : cases) ++out[c.suite];
  return out;
}

BenchEnv BenchEnv::load(const std::string& env_dir) {
  BenchEnv env;
  const fs::path dir(env_dir);
  if (fs::exists(dir / "policy.json")) env.policy = policy::PolicyDocument::load_file((dir / "policy.json").string());
  if (fs::exists(dir / "proxy.json")) {
    const auto j = json::parse(read_file(dir / "proxy.json"), nullptr, false);
    if (j.is_discarded() || !j.contains("callers") || !j["callers"].is_object()) {
      throw CorpusError("env/proxy.json must hold a callers object", {(dir / "proxy.json").string()});
    }
    env.callers = j["callers"].get<std::map<std::string, std::string>>();
  }
  return env;
}

std::optional<std::string> BenchEnv::token_for(const std::string& caller) const {
  for (const auto& [token, id] : callers) {
    if (id == caller) return token;
  }
  return std::nullopt;
}

std::string_view to_string(EngineId e) {
  switch (e) {
    case EngineId::no_prism: return "no_prism";
    case EngineId::heuristics_only: return "heuristics_only";
    case EngineId::heuristic: return "heuristic";
    case EngineId::scanner: return "scanner";
    case EngineId::proxy_policy: return "proxy_policy";
    case EngineId::plugin_only: return "plugin_only";
    case EngineId::plugin_scanner: return "plugin_scanner";
    case EngineId::full_prism: return "full_prism";
  }
  return "no_prism";
}

std::optional<EngineId> engine_from_string(std::string_view s) {
  for (EngineId e : kAllEngines) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

bool applies(EngineId e, const BenchCase& c) {
  switch (e) {
    case EngineId::no_prism:
    case EngineId::heuristics_only: return true;
    case EngineId::heuristic:
    case EngineId::scanner: return c.kind == Kind::scan_text;
    case EngineId::proxy_policy: return c.kind == Kind::invoke_policy;
    case EngineId::plugin_only:
    case EngineId::plugin_scanner: return c.kind == Kind::plugin_flow;
    case EngineId::full_prism: return c.kind == Kind::plugin_flow || c.kind == Kind::invoke_policy;
  }
  return false;
}

bool in_ladder_slice(const BenchCase& c) {
  return c.kind == Kind::plugin_flow || c.suite == "tool_abuse" || c.suite == "benign_tool_use";
}

Metrics compute_metrics(const std::vector<CaseOutcome>& outcomes) {
  Metrics m;
  for (const auto& o : outcomes) {
    ++m.cases;
    if (o.correct()) ++m.correct;
    if (o.attack) {
      ++(o.blocked ? m.tp : m.fn);
    } else {
      ++(o.blocked ? m.fp : m.tn);
    }
  }
  m.accuracy = m.cases ? static_cast<double>(m.correct) / m.cases : 0.0;
  if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / (m.tp + m.fp);
  if (m.tp + m.fn > 0) {
    m.recall = static_cast<double>(m.tp) / (m.tp + m.fn);
    m.attack_block_rate = m.recall;
  }
  if (m.fp + m.tn > 0) m.false_positive_rate = static_cast<double>(m.fp) / (m.fp + m.tn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0) {
    m.f1 = 2 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  return m;
}

double percentile_ms(std::vector<std::chrono::nanoseconds> samples, double q) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * samples.size()));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return std::chrono::duration<double, std::milli>(samples[rank - 1]).count();
}

EngineReport run_engine(EngineId engine, const std::vector<BenchCase>& cases, const BenchEnv& env,
                        const BenchOptions& options) {
  EngineReport rep;
  rep.engine = engine;
  const bool uses_scanner =
      engine == EngineId::scanner || engine == EngineId::plugin_scanner || engine == EngineId::full_prism;
  rep.run_meta.scanner_mode = uses_scanner ? std::string(scanner::to_string(options.model.mode)) : "none";
  if (uses_scanner && options.model.mode != scanner::ModelMode::disabled) {
    rep.run_meta.model_label = scanner::make_judge(options.model)->label();
    rep.run_meta.timeout_ms = options.model.timeout.count();
  }

  EngineRunner runner(engine, env, options);
  std::vector<std::chrono::nanoseconds> latencies;
  const auto before = usage_now();
  for (const auto& c : cases) {
    if (!applies(engine, c)) {
      if (options.passthrough_unsupported) rep.outcomes.push_back({c.id, c.attack, false, false, "not handled", {}});
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto out = runner.run(c);
    out.latency = std::chrono::steady_clock::now() - t0;
    latencies.push_back(out.latency);
    rep.outcomes.push_back(std::move(out));
  }
  const auto after = usage_now();

  rep.metrics = compute_metrics(rep.outcomes);
  rep.metrics.scan_path_counts = runner.scan_paths();
  rep.profiling.p50_ms = percentile_ms(latencies, 50);
  rep.profiling.p95_ms = percentile_ms(latencies, 95);
  rep.profiling.p99_ms = percentile_ms(latencies, 99);
  rep.profiling.cpu_ms_per_case = latencies.empty() ? 0.0 : (after.cpu_ms - before.cpu_ms) / latencies.size();
  rep.profiling.peak_rss_delta_kb = after.max_rss_kb - before.max_rss_kb;
  return rep;
}

std::vector<EngineReport> run_ladder(const std::vector<BenchCase>& cases, const BenchEnv& env, BenchOptions options) {
  std::vector<BenchCase> slice;
  for (const auto& c : cases) {
    if (in_ladder_slice(c)) slice.push_back(c);
  }
  options.passthrough_unsupported = true;
  std::vector<EngineReport> rows;
  for (EngineId e : kLadder) rows.push_back(run_engine(e, slice, env, options));
  return rows;
}

ordered_json metrics_to_json(const Metrics& m) {
  ordered_json j;
  j["cases"] = m.cases;
  j["correct"] = m.correct;
  j["accuracy"] = m.accuracy;
  j["precision"] = opt_number(m.precision);
  j["recall"] = opt_number(m.recall);
  j["f1"] = opt_number(m.f1);
  j["attack_block_rate"] = opt_number(m.attack_block_rate);
  j["false_positive_rate"] = opt_number(m.false_positive_rate);
  j["confusion"] = ordered_json{{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
  ordered_json paths = ordered_json::object();
  for (const char* k : {"heuristic_shortcircuit", "model_assisted", "heuristic_fallback"}) {
    if (m.scan_path_counts.count(k)) paths[k] = m.scan_path_counts.at(k);
  }
  j["scan_path_counts"] = paths;
  return j;
}

ordered_json engine_report_to_json(const EngineReport& r, bool with_cases) {
  ordered_json j;
  j["engine"] = std::string(to_string(r.engine));
  j["run_meta"] = ordered_json{{"scanner_mode", r.run_meta.scanner_mode},
                               {"model_label", r.run_meta.model_label},
                               {"timeout_ms", r.run_meta.timeout_ms}};
  j["metrics"] = metrics_to_json(r.metrics);
  j["profiling"] = ordered_json{{"p50_ms", r.profiling.p50_ms},
                                {"p95_ms", r.profiling.p95_ms},
                                {"p99_ms", r.profiling.p99_ms},
                                {"cpu_ms_per_case", r.profiling.cpu_ms_per_case},
                                {"peak_rss_delta_kb", r.profiling.peak_rss_delta_kb}};
  if (with_cases) {
    ordered_json rows = ordered_json::array();
    for (const auto& o : r.outcomes) {
      ordered_json row;
      row["id"] = o.id;
      row["label"] = o.attack ? "attack" : "benign";
      row["blocked"] = o.blocked;
      row["correct"] = o.correct();
      row["executed"] = o.executed;
      row["detail"] = o.detail;
      row["latency_us"] = std::chrono::duration<double, std::micro>(o.latency).count();
      rows.push_back(std::move(row));
    }
    j["cases"] = std::move(rows);
  }
  return j;
}

ordered_json report_to_json(const std::vector<BenchCase>& corpus, const std::vector<EngineReport>& engines,
                            const std::vector<EngineReport>& ladder) {
  ordered_json j;
  ordered_json suites = ordered_json::object();
  const auto counts = suite_counts(corpus);
  for (const auto& s : kSuites) suites[s] = counts.at(s);
  std::size_t attacks = 0;
  std::map<std::string, std::size_t> kinds;
  for (const auto& c : corpus) {
    attacks += c.attack;
    ++kinds[std::string(to_string(c.kind))];
  }
  ordered_json kind_counts = ordered_json::object();
  for (const char* k : {"scan_text", "invoke_policy", "plugin_flow"}) kind_counts[k] = kinds[k];
  j["corpus"] = ordered_json{{"total", corpus.size()},
                             {"attack", attacks},
                             {"benign", corpus.size() - attacks},
                             {"suites", suites},
                             {"kinds", kind_counts}};
  j["engines"] = ordered_json::array();
  for (const auto& r : engines) j["engines"].push_back(engine_report_to_json(r));
  j["ladder"] = ordered_json::array();
  for (const auto& r : ladder) j["ladder"].push_back(engine_report_to_json(r, false));
  return j;
}

std::string summary_table(const std::vector<EngineReport>& engines, const std::vector<EngineReport>& ladder) {
  std::ostringstream s;
  auto table = [&](const std::vector<EngineReport>& rows) {
    s << "| engine | cases | correct | accuracy | precision | recall | f1 | block rate | fpr | p95 ms | mode |\n";
    s << "|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
      const auto& m = r.metrics;
      s << "| " << to_string(r.engine) << " | " << m.cases << " | " << m.correct << " | " << fmt(m.accuracy) << " | "
        << fmt(m.precision) << " | " << fmt(m.recall) << " | " << fmt(m.f1) << " | " << fmt(m.attack_block_rate)
        << " | " << fmt(m.false_positive_rate) << " | " << fmt(r.profiling.p95_ms, 4) << " | "
        << r.run_meta.scanner_mode << " |\n";
    }
  };
  if (!engines.empty()) {
    s << "## Engines\n\n";
    table(engines);
  }
  if (!ladder.empty()) {
    s << "\n## Baseline ladder\n\n";
    table(ladder);
  }
  return s.str();
}

void emit_report(const std::string& out_dir, const ordered_json& report, const std::string& summary) {
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / "report.json") << report.dump(2) << '\n';
  std::ofstream(fs::path(out_dir) / "summary.md") << summary;
}

}  // namespace prism::bench
