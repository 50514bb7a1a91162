#include "epolis/lang/parser.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "epolis/lang/sexpr.hpp"

namespace epolis::lang {

namespace {

bool is_variable(const SExpr& e) {
  return e.is_symbol() && e.text.size() > 1 && e.text[0] == '?';
}

std::string var_name(const SExpr& e) { return e.text.substr(1); }

Value literal_of(const SExpr& e) {
  switch (e.kind) {
    case SExpr::Kind::Integer: return e.integer;
    case SExpr::Kind::Real: return e.real;
    case SExpr::Kind::String: return e.text;
    case SExpr::Kind::Symbol: return Symbol{e.text};
    case SExpr::Kind::List: break;
  }
  throw SyntaxError("expected an atom", e.pos);
}

// Leading symbols of a list form the (possibly spaced) head name.
struct Head {
  std::string name;
  std::size_t first_arg = 0;
};

Head read_head(const SExpr& list) {
  Head h;
  std::string raw;
  while (h.first_arg < list.items.size() && list.items[h.first_arg].is_symbol() &&
         !is_variable(list.items[h.first_arg])) {
    if (!raw.empty()) raw += ' ';
    raw += list.items[h.first_arg].text;
    ++h.first_arg;
  }
  if (raw.empty()) throw SyntaxError("expected a template name", list.pos);
  h.name = canonical_template_name(raw);
  return h;
}

const SExpr& expect_list(const SExpr& e, const char* what) {
  if (!e.is_list()) throw SyntaxError(std::string("expected ") + what, e.pos);
  return e;
}

Value checked_literal(const SExpr& atom, const TemplateDef& t, const SlotDef& slot) {
  Value v = literal_of(atom);
  auto c = coerce(v, slot.kind);
  if (!c)
    throw SyntaxError("type mismatch: slot '" + slot.name + "' of " + t.name + " expects " +
                          std::string(to_string(slot.kind)) + ", got " + format_value(v),
                      atom.pos);
  return *c;
}

const SlotDef& resolve_slot(const TemplateDef& t, const SExpr& name_atom) {
  if (!name_atom.is_symbol()) throw SyntaxError("expected a slot name", name_atom.pos);
  auto idx = t.slot_index(canonical_slot_name(t.name, name_atom.text));
  if (!idx) throw SyntaxError("unknown slot '" + name_atom.text + "' in " + t.name, name_atom.pos);
  return t.slots[*idx];
}

// ---------------------------------------------------------------- schema ---

TemplateDef parse_deftemplate(const SExpr& form) {
  if (form.items.size() < 2 || !form.items[1].is_symbol())
    throw SyntaxError("deftemplate needs a name", form.pos);
  TemplateDef def;
  def.pos = form.pos;
  def.name = canonical_template_name(form.items[1].text);
  for (std::size_t i = 2; i < form.items.size(); ++i) {
    const SExpr& s = form.items[i];
    if (s.is_atom() && s.kind == SExpr::Kind::String) continue;  // doc string
    expect_list(s, "(slot name kind)");
    if (s.items.size() < 2 || !(s.items[0].is_symbol("slot") || s.items[0].is_symbol("field")) ||
        !s.items[1].is_symbol())
      throw SyntaxError("expected (slot name kind)", s.pos);
    SlotDef slot{canonical_slot_name(def.name, s.items[1].text), SlotKind::Symbol};
    if (s.items.size() >= 3) {
      if (!s.items[2].is_symbol()) throw SyntaxError("expected a slot kind", s.items[2].pos);
      auto kind = slot_kind_from_string(s.items[2].text);
      if (!kind) throw SyntaxError("unknown slot kind '" + s.items[2].text + "'", s.items[2].pos);
      slot.kind = *kind;
    }
    if (s.items.size() > 3) throw SyntaxError("unexpected tokens after slot kind", s.items[3].pos);
    def.slots.push_back(std::move(slot));
  }
  validate_template(def);
  return def;
}

TemplateDef parse_listing_template(const SExpr& form) {
  static const Schema builtin = Schema::builtin();
  Head head = read_head(form);
  TemplateDef def;
  def.pos = form.pos;
  def.name = head.name;
  std::vector<std::string> names;
  for (std::size_t i = head.first_arg; i < form.items.size(); ++i) {
    const SExpr& s = expect_list(form.items[i], "(slot ?var)");
    if (s.items.empty() || !s.items[0].is_symbol()) throw SyntaxError("expected a slot name", s.pos);
    names.push_back(s.items[0].text);
  }
  // The sensor listing reuses L_AtomicLocation for player positions.
  if (def.name == "L_AtomicLocation" &&
      std::find(names.begin(), names.end(), "uid") != names.end())
    def.name = "P_PlayerPosition";
  // ...and writes the instance id of L_PoliticisedSpatialType as a second `sid`.
  bool instance_sid = def.name == "L_PoliticisedSpatialType" &&
                      std::count(names.begin(), names.end(), "sid") == 2;
  const TemplateDef* known = builtin.find(def.name);
  for (std::size_t i = head.first_arg; i < form.items.size(); ++i) {
    const SExpr& s = form.items[i];
    SlotDef slot{canonical_slot_name(def.name, s.items[0].text), SlotKind::Symbol};
    if (instance_sid && slot.name == "sid") {
      slot.name = "siid";
      instance_sid = false;
    }
    if (known) {
      if (auto idx = known->slot_index(slot.name)) slot.kind = known->slots[*idx].kind;
    } else if (s.items.size() == 1) {
      slot.kind = SlotKind::PolyhedronRef;
    }
    def.slots.push_back(std::move(slot));
  }
  validate_template(def);
  return def;
}

// ----------------------------------------------------------------- rules ---

struct Scope {
  std::set<std::string> bound;
  std::set<std::string> negation_only;
  std::map<std::string, std::string> fact_vars;  // var -> template
};

[[noreturn]] void unbound(const std::string& name, const Scope& scope, SourcePos pos,
                          const char* where) {
  if (scope.negation_only.count(name))
    throw SyntaxError("variable ?" + name +
                          " introduced only inside a negated pattern and used elsewhere",
                      pos);
  throw SyntaxError(std::string(where) + " ?" + name, pos);
}

Operand parse_operand(const SExpr& e) {
  if (is_variable(e)) return Variable{var_name(e)};
  if (e.is_list()) throw SyntaxError("operand must be a literal or variable", e.pos);
  return literal_of(e);
}

class RuleParser {
 public:
  explicit RuleParser(const Schema& schema) : schema_(schema) {}

  RuleDef parse(const SExpr& form) {
    if (form.items.size() < 2 || !form.items[1].is_symbol())
      throw SyntaxError("defrule needs a name", form.pos);
    RuleDef rule;
    rule.pos = form.pos;
    rule.name = form.items[1].text;
    Scope scope;
    std::size_t i = 2;
    if (i < form.items.size() && form.items[i].kind == SExpr::Kind::String) ++i;
    if (i < form.items.size() && form.items[i].is_list() && !form.items[i].items.empty() &&
        form.items[i].items[0].is_symbol("declare")) {
      parse_declare(form.items[i], rule);
      ++i;
    }
    bool arrow = false;
    for (; i < form.items.size(); ++i) {
      const SExpr& e = form.items[i];
      if (e.is_symbol("=>")) {
        arrow = true;
        ++i;
        break;
      }
      if (is_variable(e)) {
        if (i + 2 >= form.items.size() || !form.items[i + 1].is_symbol("<-"))
          throw SyntaxError("expected '?var <- (pattern)'", e.pos);
        const SExpr& pat = expect_list(form.items[i + 2], "a pattern after '<-'");
        std::string fv = var_name(e);
        if (scope.fact_vars.count(fv) || scope.bound.count(fv))
          throw SyntaxError("variable ?" + fv + " bound twice", e.pos);
        Pattern p = parse_pattern(pat, false, scope);
        p.fact_var = fv;
        scope.fact_vars[fv] = p.template_name;
        rule.lhs.push_back(std::move(p));
        i += 2;
        continue;
      }
      expect_list(e, "a conditional element");
      rule.lhs.push_back(parse_condition(e, scope));
    }
    if (!arrow) throw SyntaxError("rule " + rule.name + " has no '=>'", form.pos);
    if (rule.lhs.empty()) throw SyntaxError("rule " + rule.name + " has an empty LHS", form.pos);
    for (; i < form.items.size(); ++i) parse_action(form.items[i], scope, rule.rhs);
    if (rule.rhs.empty()) throw SyntaxError("rule " + rule.name + " has an empty RHS", form.pos);
    return rule;
  }

 private:
  void parse_declare(const SExpr& d, RuleDef& rule) {
    for (std::size_t k = 1; k < d.items.size(); ++k) {
      const SExpr& p = d.items[k];
      if (p.is_list() && p.items.size() == 2 && p.items[0].is_symbol("salience") &&
          p.items[1].kind == SExpr::Kind::Integer) {
        rule.salience = static_cast<int>(p.items[1].integer);
      } else {
        throw SyntaxError("unsupported declaration", p.pos);
      }
    }
  }

  Condition parse_condition(const SExpr& e, Scope& scope) {
    if (e.items.empty()) throw SyntaxError("empty conditional element", e.pos);
    const SExpr& head = e.items[0];
    if (head.is_symbol("not")) {
      if (e.items.size() != 2) throw SyntaxError("(not ...) takes one pattern", e.pos);
      return parse_pattern(expect_list(e.items[1], "a pattern inside (not ...)"), true, scope);
    }
    if (head.is_symbol("test")) {
      if (e.items.size() != 2) throw SyntaxError("(test ...) takes one comparison", e.pos);
      return parse_test(expect_list(e.items[1], "a comparison"), scope);
    }
    if (head.is_symbol() && comparator_from_string(head.text)) return parse_test(e, scope);
    return parse_pattern(e, false, scope);
  }

  TestCondition parse_test(const SExpr& e, const Scope& scope) {
    if (e.items.size() != 3 || !e.items[0].is_symbol())
      throw SyntaxError("expected (cmp a b)", e.pos);
    auto cmp = comparator_from_string(e.items[0].text);
    if (!cmp) throw SyntaxError("unknown comparator '" + e.items[0].text + "'", e.items[0].pos);
    TestCondition t{*cmp, parse_operand(e.items[1]), parse_operand(e.items[2]), e.pos};
    for (int k = 1; k <= 2; ++k)
      if (is_variable(e.items[k]) && !scope.bound.count(var_name(e.items[k])))
        unbound(var_name(e.items[k]), scope, e.items[k].pos, "unbound variable in test");
    return t;
  }

  Pattern parse_pattern(const SExpr& e, bool negated, Scope& scope) {
    Head head = read_head(e);
    const TemplateDef* t = schema_.find(head.name);
    if (!t) throw SyntaxError("unknown template '" + head.name + "'", e.pos);
    Pattern p;
    p.pos = e.pos;
    p.template_name = t->name;
    p.negated = negated;
    std::set<std::string> local;       // variables introduced by this pattern
    std::set<std::string> slots_seen;
    auto is_known = [&](const std::string& v) { return scope.bound.count(v) || local.count(v); };

    for (std::size_t i = head.first_arg; i < e.items.size(); ++i) {
      const SExpr& s = expect_list(e.items[i], "(slot constraint...)");
      if (s.items.empty()) throw SyntaxError("empty slot constraint", s.pos);
      const SlotDef& slot = resolve_slot(*t, s.items[0]);
      if (!slots_seen.insert(slot.name).second)
        throw SyntaxError("duplicate slot '" + slot.name + "' in pattern", s.pos);
      SlotConstraint sc;
      sc.slot = slot.name;
      sc.pos = s.pos;
      std::optional<std::string> slot_var;
      bool has_literal = false;
      for (std::size_t k = 1; k < s.items.size(); ++k) {
        const SExpr& term = s.items[k];
        if (term.is_symbol("&:")) {
          if (k + 1 >= s.items.size()) throw SyntaxError("'&:' needs a predicate", term.pos);
          const SExpr& pred = expect_list(s.items[++k], "a predicate after '&:'");
          sc.constraints.push_back(parse_predicate(pred, slot_var, is_known, scope));
        } else if (is_variable(term)) {
          if (slot_var) throw SyntaxError("slot '" + slot.name + "' has two variables", term.pos);
          std::string v = var_name(term);
          if (scope.fact_vars.count(v))
            throw SyntaxError("fact-address variable ?" + v + " used as a slot value", term.pos);
          if (!negated && scope.negation_only.count(v))
            unbound(v, scope, term.pos, "");
          slot_var = v;
          if (!is_known(v)) local.insert(v);
          sc.constraints.push_back(VariableConstraint{v});
        } else if (term.is_list()) {
          throw SyntaxError("unexpected list in slot constraint", term.pos);
        } else {
          if (has_literal) throw SyntaxError("slot '" + slot.name + "' has two literals", term.pos);
          has_literal = true;
          sc.constraints.push_back(LiteralConstraint{checked_literal(term, *t, slot)});
        }
      }
      if (!sc.constraints.empty()) p.slots.push_back(std::move(sc));
    }
    if (negated) {
      for (const auto& v : local) scope.negation_only.insert(v);
    } else {
      for (const auto& v : local) scope.bound.insert(v);
    }
    return p;
  }

  template <typename Known>
  PredicateConstraint parse_predicate(const SExpr& pred, const std::optional<std::string>& slot_var,
                                      Known&& is_known, const Scope& scope) {
    if (pred.items.size() != 3 || !pred.items[0].is_symbol())
      throw SyntaxError("expected (cmp ?v operand)", pred.pos);
    auto cmp = comparator_from_string(pred.items[0].text);
    if (!cmp) throw SyntaxError("unknown comparator '" + pred.items[0].text + "'", pred.pos);
    if (!slot_var) throw SyntaxError("predicate test needs the slot's variable before '&:'", pred.pos);
    const SExpr& a = pred.items[1];
    const SExpr& b = pred.items[2];
    const SExpr* other = nullptr;
    Comparator c = *cmp;
    if (is_variable(a) && var_name(a) == *slot_var) {
      other = &b;
    } else if (is_variable(b) && var_name(b) == *slot_var) {
      other = &a;
      c = flip(c);
    } else {
      throw SyntaxError("predicate test must mention ?" + *slot_var, pred.pos);
    }
    if (is_variable(*other) && !is_known(var_name(*other)))
      unbound(var_name(*other), scope, other->pos, "unbound variable in predicate test");
    return PredicateConstraint{c, parse_operand(*other)};
  }

  Expr parse_expr(const SExpr& e, const Scope& scope) {
    if (is_variable(e)) {
      std::string v = var_name(e);
      if (scope.fact_vars.count(v))
        throw SyntaxError("fact-address variable ?" + v + " used as a value", e.pos);
      if (!scope.bound.count(v)) unbound(v, scope, e.pos, "unbound RHS variable");
      return Expr::var(v);
    }
    if (e.is_atom()) return Expr::lit(literal_of(e));
    if (e.items.empty() || !e.items[0].is_symbol()) throw SyntaxError("expected (op args...)", e.pos);
    const std::string& op = e.items[0].text;
    if (op != "+" && op != "-" && op != "*" && op != "/")
      throw SyntaxError("unsupported function '" + op + "'", e.items[0].pos);
    if (e.items.size() < 2) throw SyntaxError("'" + op + "' needs arguments", e.pos);
    Expr call{Expr::Kind::Call, {}, op, {}};
    for (std::size_t k = 1; k < e.items.size(); ++k) call.args.push_back(parse_expr(e.items[k], scope));
    return call;
  }

  std::vector<SlotAssignment> parse_assignments(const SExpr& list, std::size_t from,
                                                const TemplateDef& t, const Scope& scope) {
    std::vector<SlotAssignment> out;
    std::set<std::string> seen;
    for (std::size_t k = from; k < list.items.size(); ++k) {
      const SExpr& s = expect_list(list.items[k], "(slot value)");
      if (s.items.size() != 2)
        throw SyntaxError("expected (slot value)", s.pos);
      const SlotDef& slot = resolve_slot(t, s.items[0]);
      if (!seen.insert(slot.name).second) throw SyntaxError("duplicate slot '" + slot.name + "'", s.pos);
      Expr ex = parse_expr(s.items[1], scope);
      if (ex.kind == Expr::Kind::Literal && !coerce(ex.literal, slot.kind))
        throw SyntaxError("type mismatch: slot '" + slot.name + "' expects " +
                              std::string(to_string(slot.kind)),
                          s.items[1].pos);
      out.emplace_back(slot.name, std::move(ex));
    }
    return out;
  }

  const std::string& fact_var(const SExpr& e, const Scope& scope) {
    if (!is_variable(e)) throw SyntaxError("expected a fact-address variable", e.pos);
    auto it = scope.fact_vars.find(var_name(e));
    if (it == scope.fact_vars.end()) {
      if (scope.bound.count(var_name(e)))
        throw SyntaxError("?" + var_name(e) + " is not a fact-address variable", e.pos);
      unbound(var_name(e), scope, e.pos, "unbound RHS variable");
    }
    return it->first;
  }

  void parse_action(const SExpr& e, Scope& scope, std::vector<Action>& out) {
    if (!e.is_list() || e.items.empty() || !e.items[0].is_symbol())
      throw SyntaxError("expected an action", e.pos);
    const std::string& op = e.items[0].text;
    if (op == "assert") {
      if (e.items.size() < 2) throw SyntaxError("assert needs a fact", e.pos);
      for (std::size_t k = 1; k < e.items.size(); ++k) {
        const SExpr& f = expect_list(e.items[k], "a fact template");
        Head head = read_head(f);
        const TemplateDef* t = schema_.find(head.name);
        if (!t) throw SyntaxError("unknown template '" + head.name + "'", f.pos);
        out.push_back(AssertAction{t->name, parse_assignments(f, head.first_arg, *t, scope)});
      }
    } else if (op == "retract") {
      if (e.items.size() < 2) throw SyntaxError("retract needs a fact variable", e.pos);
      for (std::size_t k = 1; k < e.items.size(); ++k)
        out.push_back(RetractAction{fact_var(e.items[k], scope)});
    } else if (op == "modify") {
      if (e.items.size() < 2) throw SyntaxError("modify needs a fact variable", e.pos);
      const std::string& fv = fact_var(e.items[1], scope);
      const TemplateDef& t = schema_.at(scope.fact_vars.at(fv));
      out.push_back(ModifyAction{fv, parse_assignments(e, 2, t, scope)});
    } else if (op == "printout") {
      if (e.items.size() < 2 || !e.items[1].is_symbol())
        throw SyntaxError("printout needs a channel", e.pos);
      EmitAction emit;
      for (std::size_t k = 2; k < e.items.size(); ++k) emit.args.push_back(parse_expr(e.items[k], scope));
      out.push_back(std::move(emit));
    } else if (op == "bind") {
      if (e.items.size() != 3 || !is_variable(e.items[1]))
        throw SyntaxError("expected (bind ?var expr)", e.pos);
      std::string v = var_name(e.items[1]);
      if (scope.fact_vars.count(v)) throw SyntaxError("cannot rebind fact variable ?" + v, e.pos);
      Expr ex = parse_expr(e.items[2], scope);
      scope.bound.insert(v);
      out.push_back(BindAction{v, std::move(ex)});
    } else {
      throw SyntaxError("unknown action '" + op + "'", e.items[0].pos);
    }
  }

  const Schema& schema_;
};

FactLiteral parse_fact_form(const SExpr& f, const Schema& schema) {
  Head head = read_head(f);
  const TemplateDef* t = schema.find(head.name);
  if (!t) throw SyntaxError("unknown template '" + head.name + "'", f.pos);
  FactLiteral fact{t->name, {}};
  for (const auto& s : t->slots) fact.values.push_back(default_value(s.kind));
  std::set<std::string> seen;
  for (std::size_t i = head.first_arg; i < f.items.size(); ++i) {
    const SExpr& s = expect_list(f.items[i], "(slot value)");
    if (s.items.empty()) throw SyntaxError("empty slot", s.pos);
    const SlotDef& slot = resolve_slot(*t, s.items[0]);
    if (!seen.insert(slot.name).second) throw SyntaxError("duplicate slot '" + slot.name + "'", s.pos);
    std::size_t idx = *t->slot_index(slot.name);
    if (s.items.size() == 1) continue;
    for (std::size_t k = 1; k < s.items.size(); ++k) {
      if (is_variable(s.items[k]))
        throw SyntaxError("variable " + s.items[k].text + " in fact literal", s.items[k].pos);
      if (s.items[k].is_list()) throw SyntaxError("unexpected list in fact slot", s.items[k].pos);
    }
    if (s.items.size() == 2) {
      fact.values[idx] = checked_literal(s.items[1], *t, slot);
      continue;
    }
    // Multi-word bare names, e.g. `(name democratic realism)`, join into one symbol.
    if (slot.kind != SlotKind::Symbol)
      throw SyntaxError("slot '" + slot.name + "' takes a single value", s.items[2].pos);
    std::string joined;
    for (std::size_t k = 1; k < s.items.size(); ++k) {
      if (!s.items[k].is_symbol())
        throw SyntaxError("slot '" + slot.name + "' takes a single value", s.items[k].pos);
      if (!joined.empty()) joined += '_';
      joined += s.items[k].text;
    }
    fact.values[idx] = Symbol{joined};
  }
  return fact;
}

bool is_form(const SExpr& e, std::string_view head) {
  return e.is_list() && !e.items.empty() && e.items[0].is_symbol(head);
}

void collect_facts(const SExpr& e, const Schema& schema, std::vector<FactLiteral>& out) {
  if (is_form(e, "deffacts")) {
    for (std::size_t i = 2; i < e.items.size(); ++i)
      out.push_back(parse_fact_form(expect_list(e.items[i], "a fact"), schema));
  } else {
    out.push_back(parse_fact_form(expect_list(e, "a fact"), schema));
  }
}

}  // namespace

std::vector<TemplateDef> parse_schema(std::string_view text) {
  std::vector<TemplateDef> out;
  std::set<std::string> names;
  for (const SExpr& e : read_sexprs(text)) {
    expect_list(e, "a template declaration");
    TemplateDef def = is_form(e, "deftemplate") ? parse_deftemplate(e) : parse_listing_template(e);
    if (!names.insert(def.name).second)
      throw SyntaxError("duplicate template '" + def.name + "'", e.pos);
    out.push_back(std::move(def));
  }
  return out;
}

std::vector<RuleDef> parse_rules(std::string_view text, const Schema& schema) {
  std::vector<RuleDef> out;
  std::set<std::string> names;
  RuleParser parser(schema);
  for (const SExpr& e : read_sexprs(text)) {
    if (!is_form(e, "defrule")) throw SyntaxError("expected (defrule ...)", e.pos);
    RuleDef r = parser.parse(e);
    if (!names.insert(r.name).second) throw SyntaxError("duplicate rule '" + r.name + "'", e.pos);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<FactLiteral> parse_facts(std::string_view text, const Schema& schema) {
  std::vector<FactLiteral> out;
  for (const SExpr& e : read_sexprs(text)) collect_facts(e, schema, out);
  return out;
}

Program parse_program(std::string_view text, const Schema& base) {
  Program prog;
  prog.schema = base;
  std::set<std::string> rule_names;
  auto forms = read_sexprs(text);
  for (const SExpr& e : forms) {
    if (is_form(e, "deftemplate")) {
      TemplateDef def = parse_deftemplate(e);
      prog.schema.add(def);
      prog.templates.push_back(std::move(def));
    }
  }
  RuleParser parser(prog.schema);
  for (const SExpr& e : forms) {
    if (is_form(e, "deftemplate")) continue;
    if (is_form(e, "defrule")) {
      RuleDef r = parser.parse(e);
      if (!rule_names.insert(r.name).second)
        throw SyntaxError("duplicate rule '" + r.name + "'", e.pos);
      prog.rules.push_back(std::move(r));
    } else {
      collect_facts(e, prog.schema, prog.facts);
    }
  }
  return prog;
}

void validate_rule(const RuleDef& rule, const Schema& schema) {
  // Round-tripping through the printer re-runs every parse-time check.
  auto parsed = parse_rules(print_rule(rule), schema);
  if (parsed.size() != 1 || !(parsed[0] == rule))
    throw Error(ErrorCode::Validation, "rule " + rule.name + " does not survive validation");
}

}  // namespace epolis::lang
