#include <sstream>

#include "epolis/lang/parser.hpp"

namespace epolis::lang {

std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::Eq: return "=";
    case Comparator::Ne: return "!=";
    case Comparator::Lt: return "<";
    case Comparator::Gt: return ">";
    case Comparator::Le: return "<=";
    case Comparator::Ge: return ">=";
  }
  return "=";
}

std::optional<Comparator> comparator_from_string(std::string_view s) {
  if (s == "=" || s == "eq") return Comparator::Eq;
  if (s == "!=" || s == "<>" || s == "neq" || s == "≠") return Comparator::Ne;
  if (s == "<") return Comparator::Lt;
  if (s == ">") return Comparator::Gt;
  if (s == "<=" || s == "≤") return Comparator::Le;
  if (s == ">=" || s == "≥") return Comparator::Ge;
  return std::nullopt;
}

Comparator flip(Comparator c) {
  switch (c) {
    case Comparator::Lt: return Comparator::Gt;
    case Comparator::Gt: return Comparator::Lt;
    case Comparator::Le: return Comparator::Ge;
    case Comparator::Ge: return Comparator::Le;
    default: return c;
  }
}

bool holds(Comparator c, const Value& a, const Value& b) {
  if (c == Comparator::Eq) return values_equal(a, b);
  if (c == Comparator::Ne) return !values_equal(a, b);
  auto ord = compare_values(a, b);
  if (ord == std::partial_ordering::unordered) return false;
  switch (c) {
    case Comparator::Lt: return ord < 0;
    case Comparator::Gt: return ord > 0;
    case Comparator::Le: return ord <= 0;
    case Comparator::Ge: return ord >= 0;
    default: return false;
  }
}

namespace {

std::string print_operand(const Operand& o) {
  if (const auto* v = std::get_if<Variable>(&o)) return "?" + v->name;
  return format_value(std::get<Value>(o));
}

std::string print_pattern(const Pattern& p) {
  std::string out = "(" + p.template_name;
  for (const auto& sc : p.slots) {
    out += " (" + sc.slot;
    const std::string* slot_var = nullptr;
    for (const auto& c : sc.constraints)
      if (const auto* v = std::get_if<VariableConstraint>(&c)) slot_var = &v->name;
    for (const auto& c : sc.constraints) {
      if (const auto* lit = std::get_if<LiteralConstraint>(&c)) {
        out += " " + format_value(lit->value);
      } else if (const auto* v = std::get_if<VariableConstraint>(&c)) {
        out += " ?" + v->name;
      } else {
        const auto& pc = std::get<PredicateConstraint>(c);
        out += "&:(" + std::string(to_string(pc.cmp)) + " ?" + *slot_var + " " +
               print_operand(pc.operand) + ")";
      }
    }
    out += ")";
  }
  return out + ")";
}

std::string print_assignments(const std::vector<SlotAssignment>& slots) {
  std::string out;
  for (const auto& [slot, expr] : slots) out += " (" + slot + " " + print_expr(expr) + ")";
  return out;
}

}  // namespace

std::string print_expr(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Literal: return format_value(e.literal);
    case Expr::Kind::Variable: return "?" + e.name;
    case Expr::Kind::Call: break;
  }
  std::string out = "(" + e.name;
  for (const auto& a : e.args) out += " " + print_expr(a);
  return out + ")";
}

std::string print_template(const TemplateDef& def) {
  std::string out = "(deftemplate " + def.name;
  for (const auto& s : def.slots)
    out += " (slot " + s.name + " " + std::string(to_string(s.kind)) + ")";
  return out + ")";
}

std::string print_rule(const RuleDef& rule) {
  std::ostringstream out;
  out << "(defrule " << rule.name << "\n";
  if (rule.salience != 0) out << "  (declare (salience " << rule.salience << "))\n";
  for (const auto& ce : rule.lhs) {
    out << "  ";
    if (const auto* p = std::get_if<Pattern>(&ce)) {
      if (p->fact_var) out << "?" << *p->fact_var << " <- ";
      if (p->negated) out << "(not " << print_pattern(*p) << ")";
      else out << print_pattern(*p);
    } else {
      const auto& t = std::get<TestCondition>(ce);
      out << "(test (" << to_string(t.cmp) << " " << print_operand(t.lhs) << " "
          << print_operand(t.rhs) << "))";
    }
    out << "\n";
  }
  out << "  =>";
  for (const auto& a : rule.rhs) {
    out << "\n  ";
    std::visit(
        [&](const auto& act) {
          using T = std::decay_t<decltype(act)>;
          if constexpr (std::is_same_v<T, AssertAction>)
            out << "(assert (" << act.template_name << print_assignments(act.slots) << "))";
          else if constexpr (std::is_same_v<T, RetractAction>)
            out << "(retract ?" << act.fact_var << ")";
          else if constexpr (std::is_same_v<T, ModifyAction>)
            out << "(modify ?" << act.fact_var << print_assignments(act.updates) << ")";
          else if constexpr (std::is_same_v<T, EmitAction>) {
            out << "(printout t";
            for (const auto& x : act.args) out << " " << print_expr(x);
            out << ")";
          } else
            out << "(bind ?" << act.var << " " << print_expr(act.expr) << ")";
        },
        a);
  }
  out << ")";
  return out.str();
}

std::string print_fact(const FactLiteral& fact, const Schema& schema) {
  const TemplateDef& t = schema.at(fact.template_name);
  std::string out = "(" + t.name;
  for (std::size_t i = 0; i < t.slots.size() && i < fact.values.size(); ++i)
    out += " (" + t.slots[i].name + " " + format_value(fact.values[i]) + ")";
  return out + ")";
}

std::string print_schema(const std::vector<TemplateDef>& defs) {
  std::string out;
  for (const auto& d : defs) out += print_template(d) + "\n";
  return out;
}

std::string print_rules(const std::vector<RuleDef>& rules) {
  std::string out;
  for (const auto& r : rules) out += print_rule(r) + "\n\n";
  return out;
}

std::string print_facts(const std::vector<FactLiteral>& facts, const Schema& schema) {
  std::string out;
  for (const auto& f : facts) out += print_fact(f, schema) + "\n";
  return out;
}

}  // namespace epolis::lang
