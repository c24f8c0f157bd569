#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "prism/scan/heuristics.hpp"

namespace prism::scanner {

using scan::Verdict;

enum class ScanPath { heuristic_shortcircuit, model_assisted, heuristic_fallback };
std::string_view to_string(ScanPath p);
std::optional<ScanPath> scan_path_from_string(std::string_view s);

enum class ModelMode { live, mock, disabled };
std::string_view to_string(ModelMode m);
std::optional<ModelMode> model_mode_from_string(std::string_view s);

enum class ModelFailure { none, timeout, connection, parse, unconfigured, unannotated, busy };
std::string_view to_string(ModelFailure f);

struct ModelJudgeConfig {
  std::string endpoint = "http://127.0.0.1:11434/api/generate";
  std::string model_label = "llama3.1:8b";
  std::chrono::milliseconds timeout{20000};
  ModelMode mode = ModelMode::disabled;
  int max_concurrent_calls = 4;
};

// Carried alongside the text; the mock judge reads its verdict from here.
struct ScanMetadata {
  std::optional<Verdict> mock_verdict;
};

struct ModelJudgment {
  std::optional<Verdict> verdict;
  std::string raw_response;
  ModelFailure failure = ModelFailure::none;
  std::string detail;
};

class ModelJudge {
 public:
  virtual ~ModelJudge() = default;
  virtual ModelJudgment judge(std::string_view text, const ScanMetadata& meta) = 0;
  virtual ModelMode mode() const = 0;
  virtual std::string label() const = 0;
};

// The fixed judge prompt and its parsing rule.
std::string judge_prompt(std::string_view text);
// Accepts "benign", "suspicious" or "malicious" as the first word of the
// response, optionally after a "verdict:" prefix; anything else is nullopt.
std::optional<Verdict> parse_judge_response(std::string_view response);

// Ollama-style /api/generate client with a bounded timeout and a cap on
// concurrent calls.
class LiveModelJudge final : public ModelJudge {
 public:
  explicit LiveModelJudge(ModelJudgeConfig cfg);
  ModelJudgment judge(std::string_view text, const ScanMetadata& meta) override;
  ModelMode mode() const override { return ModelMode::live; }
  std::string label() const override { return cfg_.model_label; }

 private:
  ModelJudgeConfig cfg_;
  std::counting_semaphore<1024> slots_;
};

// Serves the verdict annotated on the request, and nothing else.
class MockModelJudge final : public ModelJudge {
 public:
  explicit MockModelJudge(std::string label = "mock-judge") : label_(std::move(label)) {}
  ModelJudgment judge(std::string_view text, const ScanMetadata& meta) override;
  ModelMode mode() const override { return ModelMode::mock; }
  std::string label() const override { return label_; }

 private:
  std::string label_;
};

class DisabledModelJudge final : public ModelJudge {
 public:
  ModelJudgment judge(std::string_view, const ScanMetadata&) override {
    return {std::nullopt, "", ModelFailure::unconfigured, "model judge disabled"};
  }
  ModelMode mode() const override { return ModelMode::disabled; }
  std::string label() const override { return ""; }
};

std::unique_ptr<ModelJudge> make_judge(const ModelJudgeConfig& cfg);

struct ScanRequest {
  std::string text;
  std::optional<std::string> tool;
  std::optional<std::string> session;
  std::string auth_token;
  ScanMetadata metadata;
};

struct ScanResponse {
  Verdict verdict = Verdict::benign;
  int score = 0;
  ScanPath path = ScanPath::heuristic_fallback;
  std::optional<std::string> model_label;
  std::chrono::microseconds latency{0};
  std::vector<std::string> matched_rules;
  ModelFailure model_failure = ModelFailure::none;
};

nlohmann::json response_to_json(const ScanResponse& r);
ScanResponse response_from_json(const nlohmann::json& j);

class AuthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model verdict wins; a suspicious model verdict is upgraded to malicious when
// the heuristics matched at least one rule of weight >= strong_rule_weight.
Verdict combine(Verdict model, const scan::ScanResult& heuristic, const scan::RuleSet& rules, int strong_rule_weight);

struct Telemetry {
  std::uint64_t shortcircuit = 0;
  std::uint64_t model_assisted = 0;
  std::uint64_t fallback = 0;
  std::uint64_t model_timeouts = 0;
  std::uint64_t model_connection_errors = 0;
  std::uint64_t model_parse_errors = 0;
  std::uint64_t auth_failures = 0;

  std::uint64_t total() const { return shortcircuit + model_assisted + fallback; }
  nlohmann::json to_json() const;
};

struct ScannerConfig {
  std::string auth_token;
  int strong_rule_weight = 60;
};

class ScannerService {
 public:
  ScannerService(std::shared_ptr<const scan::HeuristicScanner> heuristics, std::unique_ptr<ModelJudge> judge,
                 ScannerConfig cfg);

  // Throws AuthError for a missing or wrong token and scan::InputTooLarge for
  // oversized text; neither reaches the scoring pipeline.
  ScanResponse handle_scan(const ScanRequest& req);
  // Checks a token without scanning; failures are counted in telemetry.
  bool authenticate(std::string_view token);
  nlohmann::json health() const;
  Telemetry telemetry() const;
  void reset_telemetry();

  ModelMode model_mode() const { return judge_->mode(); }
  std::string model_label() const { return judge_->label(); }

 private:
  std::shared_ptr<const scan::HeuristicScanner> heuristics_;
  std::unique_ptr<ModelJudge> judge_;
  ScannerConfig cfg_;
  std::atomic<std::uint64_t> shortcircuit_{0}, model_assisted_{0}, fallback_{0};
  std::atomic<std::uint64_t> timeouts_{0}, connection_errors_{0}, parse_errors_{0}, auth_failures_{0};
};

bool token_equal(std::string_view a, std::string_view b);

}  // namespace prism::scanner
