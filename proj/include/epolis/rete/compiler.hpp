#pragma once

#include <map>
#include <string>

#include "epolis/lang/ast.hpp"
#include "epolis/rete/network.hpp"

namespace epolis::rete {

// Where a rule variable's value lives in a complete token.
struct Binding {
  std::size_t token_index = 0;
  std::size_t slot = 0;
};

struct CompiledRule {
  ProductionId production = 0;
  std::map<std::string, Binding> variables;        // first positive occurrence
  std::map<std::string, std::size_t> fact_vars;    // `?f <- (...)` -> token index
};

// Builds (or reuses) the alpha chains and beta nodes for a validated rule and
// appends its production node. Test CEs directly after a positive pattern are
// folded into that pattern's join.
CompiledRule compile_rule(const lang::RuleDef& rule, Network& net);

}  // namespace epolis::rete
