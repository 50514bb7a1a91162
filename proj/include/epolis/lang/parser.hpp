#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "epolis/lang/ast.hpp"
#include "epolis/lang/schema.hpp"

namespace epolis::lang {

// Template declarations, either `(deftemplate Name (slot s kind) ...)` or the
// listing form `(Name (s ?var) ...)` where slot kinds come from the built-in
// schema when the name is known.
std::vector<TemplateDef> parse_schema(std::string_view text);

// `(defrule ...)` forms, validated against `schema`.
std::vector<RuleDef> parse_rules(std::string_view text, const Schema& schema);

// Ground fact literals, bare or wrapped in `(deffacts name ...)`.
std::vector<FactLiteral> parse_facts(std::string_view text, const Schema& schema);

// A complete `.prl` source: templates, rules and facts in any order. Templates
// declared in the file extend `base` before rules and facts are checked.
struct Program {
  Schema schema;
  std::vector<TemplateDef> templates;
  std::vector<RuleDef> rules;
  std::vector<FactLiteral> facts;
};
Program parse_program(std::string_view text, const Schema& base);

// Re-checks a rule built in code (not parsed) against the binding discipline.
void validate_rule(const RuleDef& rule, const Schema& schema);

std::string print_template(const TemplateDef& def);
std::string print_rule(const RuleDef& rule);
std::string print_fact(const FactLiteral& fact, const Schema& schema);
std::string print_expr(const Expr& e);
std::string print_schema(const std::vector<TemplateDef>& defs);
std::string print_rules(const std::vector<RuleDef>& rules);
std::string print_facts(const std::vector<FactLiteral>& facts, const Schema& schema);

}  // namespace epolis::lang
