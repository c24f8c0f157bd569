#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/policy/policy.hpp"
#include "prism/scanner/scanner.hpp"

namespace prism::bench {

enum class Kind { scan_text, invoke_policy, plugin_flow };
std::string_view to_string(Kind k);

// Corpus families, in report order.
inline const std::vector<std::string> kSuites = {
    "direct_injection", "indirect_injection", "exfiltration",    "tool_abuse",     "plugin_flow",
    "scanner_focused",  "benign_chat",        "benign_web",      "benign_tool_use", "keyword_controls",
};

struct BenchCase {
  std::string id;
  std::string suite;
  Kind kind = Kind::scan_text;
  bool attack = false;
  // Text the plain-rules engine looks at; defaults to payload.text for scan_text.
  std::optional<std::string> probe;
  nlohmann::json payload;
  nlohmann::json expected;
  std::optional<scan::Verdict> scanner_annotation;
  std::string source;
};

class CorpusError : public std::runtime_error {
 public:
  CorpusError(std::string what, std::vector<std::string> offending);
  const std::vector<std::string>& offending() const { return offending_; }

 private:
  std::vector<std::string> offending_;
};

BenchCase parse_case(const nlohmann::json& j, const std::string& source = "");
// Recursively loads every *.json case under the given directories (an `env`
// directory is skipped). Any invalid case fails the whole load.
std::vector<BenchCase> load_corpus(const std::vector<std::string>& dirs);
std::map<std::string, std::size_t> suite_counts(const std::vector<BenchCase>& cases);

// Policy and proxy callers the corpus is written against.
struct BenchEnv {
  policy::PolicyDocument policy = policy::PolicyDocument::defaults();
  std::map<std::string, std::string> callers;  // token -> caller id

  static BenchEnv load(const std::string& env_dir);
  std::optional<std::string> token_for(const std::string& caller) const;
};

enum class EngineId {
  no_prism,
  heuristics_only,
  heuristic,
  scanner,
  proxy_policy,
  plugin_only,
  plugin_scanner,
  full_prism,
};
std::string_view to_string(EngineId e);
std::optional<EngineId> engine_from_string(std::string_view s);
inline constexpr EngineId kAllEngines[] = {
    EngineId::no_prism,     EngineId::heuristics_only, EngineId::heuristic,      EngineId::scanner,
    EngineId::proxy_policy, EngineId::plugin_only,     EngineId::plugin_scanner, EngineId::full_prism,
};
inline constexpr EngineId kLadder[] = {EngineId::no_prism, EngineId::heuristics_only, EngineId::plugin_only,
                                       EngineId::plugin_scanner, EngineId::full_prism};

bool applies(EngineId e, const BenchCase& c);
// plugin_flow plus the tool_abuse and benign_tool_use families.
bool in_ladder_slice(const BenchCase& c);

struct CaseOutcome {
  std::string id;
  bool attack = false;
  bool blocked = false;
  bool executed = true;  // false: passed through by an engine that does not handle the kind
  std::string detail;
  std::chrono::nanoseconds latency{0};

  bool correct() const { return blocked == attack; }
};

struct Metrics {
  std::size_t cases = 0, correct = 0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0;
  // nullopt where the ratio is undefined (reported as n/a).
  std::optional<double> precision, recall, f1, attack_block_rate, false_positive_rate;
  std::map<std::string, std::uint64_t> scan_path_counts;
};

Metrics compute_metrics(const std::vector<CaseOutcome>& outcomes);

struct Profiling {
  double p50_ms = 0, p95_ms = 0, p99_ms = 0;
  double cpu_ms_per_case = 0;
  long peak_rss_delta_kb = 0;
};

// Nearest-rank percentile of the samples (q in (0, 100]).
double percentile_ms(std::vector<std::chrono::nanoseconds> samples, double q);

struct RunMeta {
  std::string scanner_mode;
  std::string model_label;
  std::int64_t timeout_ms = 0;
};

struct EngineReport {
  EngineId engine;
  Metrics metrics;
  Profiling profiling;
  RunMeta run_meta;
  std::vector<CaseOutcome> outcomes;
};

struct BenchOptions {
  scanner::ModelJudgeConfig model;  // mode, label, timeout, endpoint
  // Ladder rows: cases an engine does not handle pass through unblocked
  // instead of being left out.
  bool passthrough_unsupported = false;
};

EngineReport run_engine(EngineId engine, const std::vector<BenchCase>& cases, const BenchEnv& env,
                        const BenchOptions& options);
std::vector<EngineReport> run_ladder(const std::vector<BenchCase>& cases, const BenchEnv& env, BenchOptions options);

nlohmann::ordered_json metrics_to_json(const Metrics& m);
nlohmann::ordered_json engine_report_to_json(const EngineReport& r, bool with_cases = true);
nlohmann::ordered_json report_to_json(const std::vector<BenchCase>& corpus, const std::vector<EngineReport>& engines,
                                      const std::vector<EngineReport>& ladder);
std::string summary_table(const std::vector<EngineReport>& engines, const std::vector<EngineReport>& ladder);
// Writes report.json and summary.md into out_dir (created if missing).
void emit_report(const std::string& out_dir, const nlohmann::ordered_json& report, const std::string& summary);

}  // namespace prism::bench
