#pragma once

// Reference semantics used as test oracles. Nothing here shares code with the
// Rete network: rules are evaluated by brute-force enumeration over a plain
// fact set.

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "epolis/lang/ast.hpp"
#include "epolis/lang/schema.hpp"

namespace epolis::oracle {

using FactKey = std::pair<std::string, std::vector<lang::Value>>;
using FactSet = std::set<FactKey>;

// All complete variable environments under which `lhs` matches `facts`.
std::vector<std::map<std::string, lang::Value>> naive_matches(const std::vector<lang::Condition>& lhs,
                                                              const FactSet& facts,
                                                              const lang::Schema& schema);

// Assert-only rules evaluated stratum by stratum (descending salience) until
// nothing new is derived. Returns the final fact set.
FactSet naive_fixpoint(const std::vector<lang::RuleDef>& rules, FactSet facts,
                       const lang::Schema& schema);

// A random stratified program: templates T0..Tn with integer slots a and b,
// rules whose salience is minus their stratum, negation only over lower strata.
struct RandomProgram {
  lang::Schema schema;
  std::vector<lang::RuleDef> rules;
  std::vector<lang::FactLiteral> facts;
};
RandomProgram random_program(std::mt19937_64& rng, std::size_t max_rules, std::size_t max_facts);

}  // namespace epolis::oracle
