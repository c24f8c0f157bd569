#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace prism::scan {

enum class Category {
  instruction_override,
  system_prompt_exfil,
  credential_exfil,
  tool_abuse,
  role_override,
  format_token,
  obfuscation,
};

inline constexpr Category kAllCategories[] = {
    Category::instruction_override, Category::system_prompt_exfil, Category::credential_exfil,
    Category::tool_abuse,           Category::role_override,       Category::format_token,
    Category::obfuscation,
};

std::string_view to_string(Category c);
Category category_from_string(std::string_view name);

struct HeuristicRule {
  std::string id;
  Category category = Category::instruction_override;
  std::string pattern;  // case-insensitive Perl-style regular expression
  int weight = 0;
};

class RuleSetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RuleMatch {
  std::size_t rule_index;
  std::size_t begin;
  std::size_t end;
};

// A validated, compiled, immutable rule set.
class RuleSet {
 public:
  // Throws RuleSetError on duplicate ids, non-positive weights or patterns that
  // fail to compile.
  explicit RuleSet(std::vector<HeuristicRule> rules);
  ~RuleSet();
  RuleSet(RuleSet&&) noexcept;
  RuleSet& operator=(RuleSet&&) noexcept;

  static RuleSet from_json(const nlohmann::json& doc);
  static RuleSet load_file(const std::string& path);
  static std::shared_ptr<const RuleSet> shipped_default();

  nlohmann::json to_json() const;

  const std::vector<HeuristicRule>& rules() const { return rules_; }
  std::size_t size() const { return rules_.size(); }

  // Every non-overlapping match of every rule, in rule order then text order.
  std::vector<RuleMatch> find_all(std::string_view text) const;
  // Index of each rule that matches at least once.
  std::vector<std::size_t> matching_rules(std::string_view text) const;

 private:
  struct Compiled;
  std::vector<HeuristicRule> rules_;
  std::unique_ptr<Compiled> compiled_;
};

std::vector<HeuristicRule> default_rules();

}  // namespace prism::scan
