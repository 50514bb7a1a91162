#include "epolis/rete/engine.hpp"

#include <algorithm>
#include <cmath>

#include "epolis/error.hpp"
#include "epolis/lang/parser.hpp"

namespace epolis::rete {

using namespace lang;

Engine::Engine(Schema schema, ConflictStrategy strategy) : net_(std::move(schema), std::move(strategy)) {}

ProductionId Engine::add_rule(const RuleDef& rule) {
  if (has_rule(rule.name)) throw Error(ErrorCode::Validation, "duplicate rule " + rule.name);
  validate_rule(rule, schema());
  CompiledRule c = compile_rule(rule, net_);
  rules_.push_back(rule);
  compiled_.push_back(std::move(c));
  return compiled_.back().production;
}

void Engine::add_rules(const std::vector<RuleDef>& rules) {
  for (const auto& r : rules) add_rule(r);
}

bool Engine::has_rule(const std::string& name) const {
  return std::any_of(rules_.begin(), rules_.end(), [&](const RuleDef& r) { return r.name == name; });
}

std::vector<Value> Engine::checked_values(const TemplateDef& t, std::vector<Value> values) const {
  if (values.size() != t.slots.size())
    throw Error(ErrorCode::Validation, t.name + " expects " + std::to_string(t.slots.size()) +
                                           " slot values, got " + std::to_string(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto v = coerce(values[i], t.slots[i].kind);
    if (!v)
      throw Error(ErrorCode::Validation, "slot " + t.name + "." + t.slots[i].name + " expects " +
                                             std::string(to_string(t.slots[i].kind)) + ", got " +
                                             format_value(values[i]));
    values[i] = std::move(*v);
  }
  return values;
}

FactId Engine::assert_fact(const std::string& template_name, std::vector<Value> values) {
  auto idx = schema().index_of(template_name);
  if (!idx) throw Error(ErrorCode::Validation, "unknown template " + template_name);
  return do_assert(*idx, checked_values(schema().at(*idx), std::move(values)), {});
}

FactId Engine::assert_fact(const FactLiteral& literal) {
  return assert_fact(literal.template_name, literal.values);
}

FactId Engine::assert_slots(const std::string& template_name, const SlotUpdates& slots) {
  const TemplateDef* t = schema().find(template_name);
  if (!t) throw Error(ErrorCode::Validation, "unknown template " + template_name);
  std::vector<Value> values;
  for (const auto& s : t->slots) values.push_back(default_value(s.kind));
  for (const auto& [name, v] : slots) {
    auto i = t->slot_index(canonical_slot_name(t->name, name));
    if (!i) throw Error(ErrorCode::Validation, "unknown slot " + name + " in " + t->name);
    values[*i] = v;
  }
  return assert_fact(t->name, std::move(values));
}

void Engine::retract(FactId id) {
  if (!net_.fact(id)) throw Error(ErrorCode::UnknownId, "no live fact " + std::to_string(id));
  do_retract(id, {});
}

FactId Engine::modify(FactId id, const SlotUpdates& updates) {
  const Fact* f = net_.fact(id);
  if (!f) throw Error(ErrorCode::UnknownId, "no live fact " + std::to_string(id));
  const TemplateDef& t = schema().at(f->template_index);
  std::vector<Value> values = f->values;
  for (const auto& [name, v] : updates) {
    auto i = t.slot_index(canonical_slot_name(t.name, name));
    if (!i) throw Error(ErrorCode::Validation, "unknown slot " + name + " in " + t.name);
    values[*i] = v;
  }
  values = checked_values(t, std::move(values));
  std::size_t tmpl = f->template_index;
  do_retract(id, {});
  return do_assert(tmpl, std::move(values), {});
}

FactId Engine::do_assert(std::size_t template_index, std::vector<Value> values, const std::string& rule) {
  auto [id, is_new] = net_.insert_fact(template_index, std::move(values));
  if (is_new)
    for (Listener* l : listeners_) l->on_assert(*net_.fact(id), rule);
  return id;
}

void Engine::do_retract(FactId id, const std::string& rule) {
  const Fact* f = net_.fact(id);
  if (!f) return;
  Fact copy = *f;
  net_.remove_fact(id);
  for (Listener* l : listeners_) l->on_retract(copy, rule);
}

RunResult Engine::run(std::optional<std::size_t> max_firings) {
  RunResult r;
  while (!net_.agenda_empty()) {
    if (max_firings && r.firings >= *max_firings) {
      r.limit_hit = true;
      break;
    }
    Activation a = net_.pop_activation();
    ++r.firings;
    fire(a, r.errors);
  }
  return r;
}

// ------------------------------------------------------------------- RHS ----

namespace {

struct ArithmeticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Env = std::map<std::string, Value>;

Value eval(const Expr& e, const Env& env) {
  switch (e.kind) {
    case Expr::Kind::Literal: return e.literal;
    case Expr::Kind::Variable: {
      auto it = env.find(e.name);
      if (it == env.end()) throw ArithmeticError("unbound variable ?" + e.name);
      return it->second;
    }
    case Expr::Kind::Call: break;
  }
  std::vector<Value> args;
  for (const auto& a : e.args) {
    args.push_back(eval(a, env));
    if (!is_numeric(args.back()))
      throw ArithmeticError("non-numeric operand " + format_value(args.back()) + " to " + e.name);
  }
  if (args.empty()) throw ArithmeticError("operator " + e.name + " without operands");
  const std::string& op = e.name;
  bool all_int = std::all_of(args.begin(), args.end(),
                             [](const Value& v) { return std::holds_alternative<std::int64_t>(v); });
  if (op == "/" || op == "÷") {
    double acc = args.size() == 1 ? 1.0 : as_real(args[0]);
    for (std::size_t i = args.size() == 1 ? 0 : 1; i < args.size(); ++i) {
      double d = as_real(args[i]);
      if (d == 0.0) throw ArithmeticError("division by zero");
      acc /= d;
    }
    return acc;
  }
  if (op == "-" && args.size() == 1) {
    if (all_int) return -std::get<std::int64_t>(args[0]);
    return -as_real(args[0]);
  }
  if (all_int) {
    std::int64_t acc = std::get<std::int64_t>(args[0]);
    for (std::size_t i = 1; i < args.size(); ++i) {
      std::int64_t x = std::get<std::int64_t>(args[i]);
      if (op == "+") acc += x;
      else if (op == "-") acc -= x;
      else if (op == "*" || op == "×") acc *= x;
      else throw ArithmeticError("unknown operator " + op);
    }
    return acc;
  }
  double acc = as_real(args[0]);
  for (std::size_t i = 1; i < args.size(); ++i) {
    double x = as_real(args[i]);
    if (op == "+") acc += x;
    else if (op == "-") acc -= x;
    else if (op == "*" || op == "×") acc *= x;
    else throw ArithmeticError("unknown operator " + op);
  }
  return acc;
}

std::string emit_text(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (const auto* s = std::get_if<Symbol>(&v)) return s->name == "crlf" ? "\n" : s->name;
  return format_value(v);
}

struct StagedAssert {
  std::size_t template_index;
  std::vector<Value> values;
};
struct StagedRetract {
  std::string fact_var;
};
struct StagedModify {
  std::string fact_var;
  std::vector<std::pair<std::size_t, Value>> updates;
};
using Staged = std::variant<StagedAssert, StagedRetract, StagedModify, std::string>;

}  // namespace

bool Engine::fire(const Activation& a, std::vector<RuleError>& errors) {
  const RuleDef& rule = rules_[a.production];
  const CompiledRule& c = compiled_[a.production];
  for (Listener* l : listeners_) l->on_fire(rule.name, a.token);

  Env env;
  for (const auto& [name, b] : c.variables) env[name] = net_.fact(a.token[b.token_index])->values[b.slot];
  std::map<std::string, FactId> fact_ids;
  for (const auto& [name, idx] : c.fact_vars) fact_ids[name] = a.token[idx];

  std::vector<Staged> staged;
  try {
    for (const Action& act : rule.rhs) {
      if (const auto* as = std::get_if<AssertAction>(&act)) {
        std::size_t idx = *schema().index_of(as->template_name);
        const TemplateDef& t = schema().at(idx);
        std::vector<Value> values;
        for (const auto& s : t.slots) values.push_back(default_value(s.kind));
        for (const auto& [slot, expr] : as->slots) {
          std::size_t i = *t.slot_index(canonical_slot_name(t.name, slot));
          auto v = coerce(eval(expr, env), t.slots[i].kind);
          if (!v) throw ArithmeticError("kind mismatch for " + t.name + "." + t.slots[i].name);
          values[i] = std::move(*v);
        }
        staged.emplace_back(StagedAssert{idx, std::move(values)});
      } else if (const auto* r = std::get_if<RetractAction>(&act)) {
        staged.emplace_back(StagedRetract{r->fact_var});
      } else if (const auto* m = std::get_if<ModifyAction>(&act)) {
        const Fact* f = net_.fact(fact_ids.at(m->fact_var));
        const TemplateDef& t = schema().at(f->template_index);
        StagedModify sm{m->fact_var, {}};
        for (const auto& [slot, expr] : m->updates) {
          std::size_t i = *t.slot_index(canonical_slot_name(t.name, slot));
          auto v = coerce(eval(expr, env), t.slots[i].kind);
          if (!v) throw ArithmeticError("kind mismatch for " + t.name + "." + t.slots[i].name);
          sm.updates.emplace_back(i, std::move(*v));
        }
        staged.emplace_back(std::move(sm));
      } else if (const auto* em = std::get_if<EmitAction>(&act)) {
        std::string text;
        for (const auto& x : em->args) text += emit_text(eval(x, env));
        staged.emplace_back(std::move(text));
      } else {
        const auto& b = std::get<BindAction>(act);
        env[b.var] = eval(b.expr, env);
      }
    }
  } catch (const ArithmeticError& e) {
    errors.push_back({rule.name, e.what()});
    return false;
  }

  for (Staged& s : staged) {
    if (auto* as = std::get_if<StagedAssert>(&s)) {
      do_assert(as->template_index, std::move(as->values), rule.name);
    } else if (auto* r = std::get_if<StagedRetract>(&s)) {
      do_retract(fact_ids.at(r->fact_var), rule.name);
    } else if (auto* m = std::get_if<StagedModify>(&s)) {
      FactId id = fact_ids.at(m->fact_var);
      const Fact* f = net_.fact(id);
      if (!f) continue;
      std::size_t tmpl = f->template_index;
      std::vector<Value> values = f->values;
      for (auto& [i, v] : m->updates) values[i] = std::move(v);
      do_retract(id, rule.name);
      fact_ids[m->fact_var] = do_assert(tmpl, std::move(values), rule.name);
    } else {
      const auto& text = std::get<std::string>(s);
      output_ += text;
      for (Listener* l : listeners_) l->on_emit(text);
    }
  }
  return true;
}

// ------------------------------------------------------------------ query ----

std::vector<const Fact*> Engine::facts_of(const std::string& template_name) const {
  std::vector<const Fact*> out;
  auto idx = schema().index_of(template_name);
  if (!idx) return out;
  for (const auto& [id, f] : net_.facts())
    if (f.template_index == *idx) out.push_back(&f);
  return out;
}

const Value& Engine::slot(const Fact& f, const std::string& name) const {
  const TemplateDef& t = schema().at(f.template_index);
  auto i = t.slot_index(canonical_slot_name(t.name, name));
  if (!i) throw Error(ErrorCode::Validation, "unknown slot " + name + " in " + t.name);
  return f.values[*i];
}

std::string Engine::format_fact(const Fact& f) const {
  const TemplateDef& t = schema().at(f.template_index);
  return print_fact(FactLiteral{t.name, f.values}, schema());
}

std::string Engine::take_output() {
  std::string out;
  out.swap(output_);
  return out;
}

void Engine::remove_listener(Listener* l) {
  listeners_.erase(std::remove(listeners_.begin(), listeners_.end(), l), listeners_.end());
}

Engine::Snapshot Engine::snapshot() const {
  return Snapshot{kSnapshotFormat, rules_.size(), std::make_shared<Network>(net_), output_};
}

void Engine::restore(const Snapshot& s) {
  if (s.format != kSnapshotFormat || !s.net)
    throw Error(ErrorCode::Corrupt, "snapshot format " + std::to_string(s.format) + " not supported");
  if (s.rule_version != rules_.size())
    throw Error(ErrorCode::Corrupt, "snapshot was taken with " + std::to_string(s.rule_version) +
                                        " rules, engine has " + std::to_string(rules_.size()));
  net_ = *s.net;
  output_ = s.output;
}

}  // namespace epolis::rete
