#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "epolis/lang/ast.hpp"

namespace epolis::lang {

// Collapses the spaced spellings used in the predicate listings
// ("H_User Answered Dilemma") and known misspellings onto canonical names.
std::string canonical_template_name(std::string_view raw);
// Hyphens become underscores (`start-time` == `start_time`), plus per-template aliases.
std::string canonical_slot_name(std::string_view template_name, std::string_view raw);

class Schema {
 public:
  Schema() = default;

  // Every built-in SAL / DAL / HIST template.
  static Schema builtin();

  void add(TemplateDef def);  // throws on duplicate template or slot
  void merge(const std::vector<TemplateDef>& defs);

  const TemplateDef* find(std::string_view name) const;
  const TemplateDef& at(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  const TemplateDef& at(std::size_t index) const { return templates_[index]; }

  const std::vector<TemplateDef>& templates() const { return templates_; }
  std::size_t size() const { return templates_.size(); }

 private:
  std::vector<TemplateDef> templates_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
};

void validate_template(const TemplateDef& def);

}  // namespace epolis::lang
