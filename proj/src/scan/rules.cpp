#include "prism/scan/rules.hpp"

#include <boost/regex.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace prism::scan {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::instruction_override: return "instruction_override";
    case Category::system_prompt_exfil: return "system_prompt_exfil";
    case Category::credential_exfil: return "credential_exfil";
    case Category::tool_abuse: return "tool_abuse";
    case Category::role_override: return "role_override";
    case Category::format_token: return "format_token";
    case Category::obfuscation: return "obfuscation";
  }
  return "";
}

Category category_from_string(std::string_view name) {
  for (Category c : kAllCategories) {
    if (to_string(c) == name) return c;
  }
  throw RuleSetError("unknown rule category '" + std::string(name) + "'");
}

struct RuleSet::Compiled {
  std::vector<boost::regex> patterns;
};

RuleSet::RuleSet(std::vector<HeuristicRule> rules) : rules_(std::move(rules)), compiled_(std::make_unique<Compiled>()) {
  std::set<std::string> ids;
  compiled_->patterns.reserve(rules_.size());
  for (const auto& rule : rules_) {
    if (rule.id.empty()) throw RuleSetError("rule with empty id");
    if (!ids.insert(rule.id).second) throw RuleSetError("duplicate rule id '" + rule.id + "'");
    if (rule.weight <= 0) throw RuleSetError("rule '" + rule.id + "' has non-positive weight");
    if (rule.pattern.empty()) throw RuleSetError("rule '" + rule.id + "' has an empty pattern");
    try {
      compiled_->patterns.emplace_back(rule.pattern, boost::regex::perl | boost::regex::icase);
    } catch (const boost::regex_error& e) {
      throw RuleSetError("rule '" + rule.id + "' has a malformed pattern: " + e.what());
    }
  }
}

RuleSet::~RuleSet() = default;
RuleSet::RuleSet(RuleSet&&) noexcept = default;
RuleSet& RuleSet::operator=(RuleSet&&) noexcept = default;

RuleSet RuleSet::from_json(const nlohmann::json& doc) {
  const nlohmann::json& list = doc.is_object() ? doc.at("rules") : doc;
  if (!list.is_array()) throw RuleSetError("rule set must be a list of rules");
  std::vector<HeuristicRule> rules;
  rules.reserve(list.size());
  for (const auto& item : list) {
    try {
      HeuristicRule r;
      r.id = item.at("id").get<std::string>();
      r.category = category_from_string(item.at("category").get<std::string>());
      r.pattern = item.at("pattern").get<std::string>();
      r.weight = item.at("weight").get<int>();
      rules.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw RuleSetError(std::string("invalid rule entry: ") + e.what());
    }
  }
  return RuleSet(std::move(rules));
}

RuleSet RuleSet::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuleSetError("cannot open rule file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw RuleSetError("rule file " + path + " is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

std::shared_ptr<const RuleSet> RuleSet::shipped_default() {
  static const std::shared_ptr<const RuleSet> rules = std::make_shared<const RuleSet>(default_rules());
  return rules;
}

nlohmann::json RuleSet::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : rules_) {
    list.push_back({{"id", r.id}, {"category", std::string(to_string(r.category))}, {"pattern", r.pattern},
                    {"weight", r.weight}});
  }
  return {{"rules", list}};
}

std::vector<RuleMatch> RuleSet::find_all(std::string_view text) const {
  std::vector<RuleMatch> out;
  for (std::size_t i = 0; i < compiled_->patterns.size(); ++i) {
    boost::cregex_iterator it(text.data(), text.data() + text.size(), compiled_->patterns[i]);
    for (const boost::cregex_iterator end; it != end; ++it) {
      const auto& m = *it;
      if (m[0].first == m[0].second) continue;
      const auto begin = static_cast<std::size_t>(m[0].first - text.data());
      out.push_back(RuleMatch{i, begin, static_cast<std::size_t>(m[0].second - text.data())});
    }
  }
  return out;
}

std::vector<std::size_t> RuleSet::matching_rules(std::string_view text) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < compiled_->patterns.size(); ++i) {
    if (boost::regex_search(text.data(), text.data() + text.size(), compiled_->patterns[i])) out.push_back(i);
  }
  return out;
}

}  // namespace prism::scan
