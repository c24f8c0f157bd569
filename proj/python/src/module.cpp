#include <chrono>
#include <stdexcept>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "prism/audit/audit_log.hpp"
#include "prism/bench/bench.hpp"
#include "prism/policy/policy.hpp"
#include "prism/risk/risk_engine.hpp"
#include "prism/scan/heuristics.hpp"

namespace py = pybind11;
using namespace prism;

namespace {

// Structured results cross the boundary as JSON text; the Python side decodes.

scan::Origin origin_from(const std::string& s) {
  for (auto o : {scan::Origin::user_message, scan::Origin::prompt, scan::Origin::tool_result, scan::Origin::outbound,
                 scan::Origin::probe}) {
    if (scan::to_string(o) == s) return o;
  }
  throw std::invalid_argument("unknown origin: " + s);
}

std::string scan_text(const std::string& text, const std::string& origin) {
  static const scan::HeuristicScanner scanner;
  const auto r = scanner.scan(text, origin_from(origin));
  nlohmann::json j;
  j["verdict"] = scan::to_string(r.verdict);
  j["score"] = r.score.clamped_score;
  j["raw_points"] = r.score.raw_points;
  j["matched_rules"] = r.score.matched_rule_ids;
  j["canonical"] = r.canonical.normalized;
  return j.dump();
}

class Policy {
 public:
  explicit Policy(const std::string& doc_json)
      : engine_(doc_json.empty() ? policy::PolicyDocument::defaults()
                                 : policy::PolicyDocument::from_json(nlohmann::json::parse(doc_json))) {}

  std::string check_exec(const std::string& c) const { return dump(engine_.check_exec(c)); }
  std::string check_path(const std::string& p) const { return dump(engine_.check_path(p)); }
  std::string check_url(const std::string& u) const { return dump(engine_.check_url(u)); }
  std::string scan_secrets(const std::string& text) const {
    const auto s = engine_.scan_secrets(text);
    nlohmann::json findings = nlohmann::json::array();
    for (const auto& f : s.findings) findings.push_back({{"pattern_id", f.pattern_id}, {"begin", f.begin}, {"end", f.end}});
    return nlohmann::json{{"findings", findings}, {"redacted", s.redacted}}.dump();
  }
  std::uint64_t reload(const std::string& doc_json) {
    return engine_.reload(policy::PolicyDocument::from_json(nlohmann::json::parse(doc_json)));
  }
  std::uint64_t revision() const { return engine_.revision(); }

 private:
  static std::string dump(const policy::PolicyDecision& d) { return policy::decision_to_json(d).dump(); }
  policy::PolicyEngine engine_;
};

// Times are milliseconds on a caller-supplied monotonic axis.
class Risk {
 public:
  explicit Risk(std::int64_t ttl_ms) {
    risk::RiskConfig cfg;
    cfg.ttl = risk::Duration(ttl_ms);
    engine_ = std::make_unique<risk::RiskEngine>(cfg);
  }

  int add(const std::string& scope, const std::string& id, int amount, std::int64_t now_ms) {
    return engine_->add_risk(key(scope, id), amount, "python", at(now_ms));
  }
  int current(const std::string& scope, const std::string& id, std::int64_t now_ms) const {
    return engine_->current_risk(key(scope, id), at(now_ms));
  }
  std::string level(const std::string& scope, const std::string& id, std::int64_t now_ms) const {
    return std::string(risk::to_string(engine_->response_level(key(scope, id), at(now_ms))));
  }
  std::size_t sweep(std::int64_t now_ms) { return engine_->sweep(at(now_ms)); }

 private:
  static risk::RiskKey key(const std::string& scope, const std::string& id) {
    if (scope == "session") return risk::RiskKey::session(id);
    if (scope == "conversation") return risk::RiskKey::conversation(id);
    throw std::invalid_argument("scope must be 'session' or 'conversation'");
  }
  static risk::TimePoint at(std::int64_t ms) { return risk::TimePoint{} + risk::Duration(ms); }

  std::unique_ptr<risk::RiskEngine> engine_;
};

std::string verify_audit(const std::string& path, const std::string& key, bool anchors) {
  const auto rep = anchors ? audit::verify_with_anchors_file(path, key) : audit::verify_chain_file(path, key);
  nlohmann::json j;
  j["ok"] = rep.ok;
  j["entries_checked"] = rep.entries_checked;
  j["anchors_checked"] = rep.anchors_checked;
  j["first_break"] = nullptr;
  if (rep.first_break) {
    j["first_break"] = {{"seq", rep.first_break->seq},
                        {"failure", audit::to_string(rep.first_break->failure)},
                        {"detail", rep.first_break->detail}};
  }
  return j.dump();
}

std::string run_benchmark(const std::vector<std::string>& corpus_dirs, const std::string& env_dir,
                          const std::vector<std::string>& engines, const std::string& mode, bool ladder) {
  const auto cases = bench::load_corpus(corpus_dirs);
  const auto env = bench::BenchEnv::load(env_dir);
  bench::BenchOptions opts;
  const auto m = scanner::model_mode_from_string(mode);
  if (!m) throw std::invalid_argument("unknown scanner mode: " + mode);
  opts.model.mode = *m;

  std::vector<bench::EngineReport> reports;
  for (const auto& name : engines) {
    const auto e = bench::engine_from_string(name);
    if (!e) throw std::invalid_argument("unknown engine: " + name);
    py::gil_scoped_release release;
    reports.push_back(bench::run_engine(*e, cases, env, opts));
  }
  std::vector<bench::EngineReport> rows;
  if (ladder) {
    py::gil_scoped_release release;
    rows = bench::run_ladder(cases, env, opts);
  }
  return bench::report_to_json(cases, reports, rows).dump();
}

}  // namespace

PYBIND11_MODULE(_prism, m) {
  m.doc() = "Native core of the prism runtime guard";

  m.def("scan_text", &scan_text, py::arg("text"), py::arg("origin") = "tool_result");

  py::class_<Policy>(m, "Policy")
      .def(py::init<const std::string&>(), py::arg("doc_json") = "")
      .def("check_exec", &Policy::check_exec)
      .def("check_path", &Policy::check_path)
      .def("check_url", &Policy::check_url)
      .def("scan_secrets", &Policy::scan_secrets)
      .def("reload", &Policy::reload)
      .def_property_readonly("revision", &Policy::revision);

  py::class_<Risk>(m, "RiskEngine")
      .def(py::init<std::int64_t>(), py::arg("ttl_ms") = 30 * 60 * 1000)
      .def("add", &Risk::add, py::arg("scope"), py::arg("id"), py::arg("amount"), py::arg("now_ms"))
      .def("current", &Risk::current, py::arg("scope"), py::arg("id"), py::arg("now_ms"))
      .def("level", &Risk::level, py::arg("scope"), py::arg("id"), py::arg("now_ms"))
      .def("sweep", &Risk::sweep, py::arg("now_ms"));

  m.def("verify_audit", &verify_audit, py::arg("path"), py::arg("key"), py::arg("anchors") = false);
  m.def("run_benchmark", &run_benchmark, py::arg("corpus_dirs"), py::arg("env_dir"), py::arg("engines"),
        py::arg("mode") = "mock", py::arg("ladder") = true);

  py::register_exception<policy::PolicyError>(m, "PolicyError", PyExc_ValueError);
  py::register_exception<bench::CorpusError>(m, "CorpusError", PyExc_ValueError);
}
