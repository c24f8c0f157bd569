#include "prism/scan/heuristics.hpp"

#include <algorithm>

namespace prism::scan {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::benign: return "benign";
    case Verdict::suspicious: return "suspicious";
    case Verdict::malicious: return "malicious";
  }
  return "benign";
}

std::optional<Verdict> verdict_from_string(std::string_view s) {
  if (s == "benign") return Verdict::benign;
  if (s == "suspicious") return Verdict::suspicious;
  if (s == "malicious") return Verdict::malicious;
  return std::nullopt;
}

bool VerdictThresholds::valid() const { return suspicious_at > 0 && suspicious_at < malicious_at && malicious_at <= 100; }

namespace {

ScanScore from_matches(const RuleSet& rules, const std::vector<std::size_t>& matched) {
  ScanScore s;
  for (std::size_t i : matched) {
    s.raw_points += rules.rules()[i].weight;
    s.matched_rule_ids.push_back(rules.rules()[i].id);
  }
  return s;
}

}  // namespace

ScanScore score(const CanonicalText& text, const RuleSet& rules, const ScoringOptions& options) {
  const auto on_normalized = rules.matching_rules(text.normalized);
  ScanScore s = from_matches(rules, on_normalized);
  if (!on_normalized.empty() && !text.transforms.empty()) {
    const auto on_original = rules.matching_rules(text.original);
    const bool revealed = std::any_of(on_normalized.begin(), on_normalized.end(), [&](std::size_t i) {
      return !std::binary_search(on_original.begin(), on_original.end(), i);
    });
    if (revealed) s.canonicalization_bonus = options.canonicalization_bonus;
  }
  s.raw_points += s.canonicalization_bonus;
  s.clamped_score = std::min(100, s.raw_points);
  return s;
}

ScanScore score_plain(std::string_view text, const RuleSet& rules) {
  ScanScore s = from_matches(rules, rules.matching_rules(text));
  s.clamped_score = std::min(100, s.raw_points);
  return s;
}

Verdict classify(int clamped_score, const VerdictThresholds& thresholds) {
  if (clamped_score >= thresholds.malicious_at) return Verdict::malicious;
  if (clamped_score >= thresholds.suspicious_at) return Verdict::suspicious;
  return Verdict::benign;
}

HeuristicScanner::HeuristicScanner(std::shared_ptr<const RuleSet> rules, HeuristicConfig config)
    : rules_(std::move(rules)), config_(config) {
  if (!config_.thresholds.valid()) throw std::invalid_argument("verdict thresholds must satisfy 0 < suspicious < malicious <= 100");
}

ScanResult HeuristicScanner::scan(const RawText& input) const {
  const auto rules = rules_.load();
  ScanResult r;
  r.canonical = canonicalize(input, config_.limits);
  r.score = score(r.canonical, *rules, config_.scoring);
  r.verdict = classify(r.score, config_.thresholds);
  return r;
}

ScanResult HeuristicScanner::scan(std::string_view text, Origin origin) const {
  return scan(RawText{std::string(text), origin});
}

std::vector<SourceSpan> suspicious_spans(const CanonicalText& text, const RuleSet& rules) {
  std::vector<SourceSpan> spans;
  const std::string& orig = text.original;
  for (const RuleMatch& m : rules.find_all(text.normalized)) {
    bool exact = true;
    SourceSpan span = text.map_to_original(m.begin, m.end, exact);
    if (!exact) {
      while (span.begin > 0 && orig[span.begin - 1] != '\n') --span.begin;
      while (span.end < orig.size() && orig[span.end] != '\n') ++span.end;
    }
    spans.push_back(span);
  }
  std::sort(spans.begin(), spans.end(), [](SourceSpan a, SourceSpan b) { return a.begin < b.begin; });
  std::vector<SourceSpan> merged;
  for (SourceSpan s : spans) {
    if (!merged.empty() && s.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back(s);
    }
  }
  return merged;
}

}  // namespace prism::scan
