#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "prism/common/snapshot.hpp"
#include "prism/scan/canonicalize.hpp"
#include "prism/scan/rules.hpp"

namespace prism::scan {

enum class Verdict { benign = 0, suspicious = 1, malicious = 2 };

std::string_view to_string(Verdict v);
std::optional<Verdict> verdict_from_string(std::string_view s);

struct VerdictThresholds {
  int suspicious_at = 40;
  int malicious_at = 70;

  // 0 < suspicious_at < malicious_at <= 100
  bool valid() const;
};

struct ScanScore {
  int raw_points = 0;
  int clamped_score = 0;
  std::vector<std::string> matched_rule_ids;
  int canonicalization_bonus = 0;
};

struct ScoringOptions {
  // Added once when some rule matches the normalized text but not the original.
  int canonicalization_bonus = 25;
};

ScanScore score(const CanonicalText& text, const RuleSet& rules, const ScoringOptions& options = {});

// Rules applied to the text as given: no canonicalization, no bonus.
ScanScore score_plain(std::string_view text, const RuleSet& rules);

// Total: benign below suspicious_at, malicious from malicious_at (inclusive).
Verdict classify(int clamped_score, const VerdictThresholds& thresholds);
inline Verdict classify(const ScanScore& s, const VerdictThresholds& t) { return classify(s.clamped_score, t); }

struct ScanResult {
  CanonicalText canonical;
  ScanScore score;
  Verdict verdict = Verdict::benign;
};

struct HeuristicConfig {
  CanonicalizationLimits limits;
  VerdictThresholds thresholds;
  ScoringOptions scoring;
};

// The shared first scanning tier. Thread-safe; the rule set can be swapped
// while scans are in flight.
class HeuristicScanner {
 public:
  explicit HeuristicScanner(std::shared_ptr<const RuleSet> rules = RuleSet::shipped_default(),
                            HeuristicConfig config = {});

  ScanResult scan(const RawText& input) const;
  ScanResult scan(std::string_view text, Origin origin) const;

  void replace_rules(std::shared_ptr<const RuleSet> rules) { rules_.store(std::move(rules)); }
  std::shared_ptr<const RuleSet> rules() const { return rules_.load(); }
  const HeuristicConfig& config() const { return config_; }

 private:
  SnapshotCell<RuleSet> rules_;
  HeuristicConfig config_;
};

// Rule-match spans on the normalized text mapped back to original offsets,
// merged and sorted. Spans whose mapping is ambiguous widen to whole lines.
std::vector<SourceSpan> suspicious_spans(const CanonicalText& text, const RuleSet& rules);

}  // namespace prism::scan
