#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "epolis/error.hpp"
#include "epolis/lang/value.hpp"

namespace epolis::lang {

// Source position carried by AST nodes. Positions never take part in AST
// equality, so a reparsed pretty-print compares equal to the original.
struct AstPos : SourcePos {
  AstPos() = default;
  AstPos(SourcePos p) : SourcePos(p) {}
  friend bool operator==(const AstPos&, const AstPos&) { return true; }
};

struct SlotDef {
  std::string name;
  SlotKind kind = SlotKind::Symbol;
  friend bool operator==(const SlotDef&, const SlotDef&) = default;
};

struct TemplateDef {
  std::string name;
  std::vector<SlotDef> slots;
  AstPos pos;

  std::optional<std::size_t> slot_index(std::string_view slot) const;
  friend bool operator==(const TemplateDef&, const TemplateDef&) = default;
};

enum class Comparator { Eq, Ne, Lt, Gt, Le, Ge };

std::string_view to_string(Comparator c);
std::optional<Comparator> comparator_from_string(std::string_view s);
Comparator flip(Comparator c);  // a < b  <=>  b > a
bool holds(Comparator c, const Value& a, const Value& b);

struct Variable {
  std::string name;  // without the leading '?'
  friend bool operator==(const Variable&, const Variable&) = default;
};

using Operand = std::variant<Value, Variable>;

struct LiteralConstraint {
  Value value;
  friend bool operator==(const LiteralConstraint&, const LiteralConstraint&) = default;
};
struct VariableConstraint {
  std::string name;
  friend bool operator==(const VariableConstraint&, const VariableConstraint&) = default;
};
// Slot value <cmp> operand; written `?v&:(cmp ?v operand)`.
struct PredicateConstraint {
  Comparator cmp = Comparator::Eq;
  Operand operand;
  friend bool operator==(const PredicateConstraint&, const PredicateConstraint&) = default;
};
using Constraint = std::variant<LiteralConstraint, VariableConstraint, PredicateConstraint>;

struct SlotConstraint {
  std::string slot;
  std::vector<Constraint> constraints;
  AstPos pos;
  friend bool operator==(const SlotConstraint&, const SlotConstraint&) = default;
};

struct Pattern {
  std::string template_name;
  std::vector<SlotConstraint> slots;
  bool negated = false;
  std::optional<std::string> fact_var;  // `?f <- (...)`
  AstPos pos;
  friend bool operator==(const Pattern&, const Pattern&) = default;
};

struct TestCondition {
  Comparator cmp = Comparator::Eq;
  Operand lhs;
  Operand rhs;
  AstPos pos;
  friend bool operator==(const TestCondition&, const TestCondition&) = default;
};

using Condition = std::variant<Pattern, TestCondition>;

struct Expr {
  enum class Kind { Literal, Variable, Call };
  Kind kind = Kind::Literal;
  Value literal;
  std::string name;  // variable name or operator
  std::vector<Expr> args;

  static Expr lit(Value v) { return Expr{Kind::Literal, std::move(v), {}, {}}; }
  static Expr var(std::string n) { return Expr{Kind::Variable, {}, std::move(n), {}}; }
  friend bool operator==(const Expr&, const Expr&) = default;
};

using SlotAssignment = std::pair<std::string, Expr>;

struct AssertAction {
  std::string template_name;
  std::vector<SlotAssignment> slots;
  friend bool operator==(const AssertAction&, const AssertAction&) = default;
};
struct RetractAction {
  std::string fact_var;
  friend bool operator==(const RetractAction&, const RetractAction&) = default;
};
struct ModifyAction {
  std::string fact_var;
  std::vector<SlotAssignment> updates;
  friend bool operator==(const ModifyAction&, const ModifyAction&) = default;
};
// `(printout t ...)`; the symbol `crlf` among the arguments prints a newline.
struct EmitAction {
  std::vector<Expr> args;
  friend bool operator==(const EmitAction&, const EmitAction&) = default;
};
struct BindAction {
  std::string var;
  Expr expr;
  friend bool operator==(const BindAction&, const BindAction&) = default;
};

using Action = std::variant<AssertAction, RetractAction, ModifyAction, EmitAction, BindAction>;

struct RuleDef {
  std::string name;
  int salience = 0;
  std::vector<Condition> lhs;
  std::vector<Action> rhs;
  AstPos pos;

  std::size_t specificity() const { return lhs.size(); }
  friend bool operator==(const RuleDef&, const RuleDef&) = default;
};

// A ground fact with one value per template slot, in template order.
struct FactLiteral {
  std::string template_name;
  std::vector<Value> values;
  friend bool operator==(const FactLiteral&, const FactLiteral&) = default;
};

}  // namespace epolis::lang
