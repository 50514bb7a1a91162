#include "epolis/rete/compiler.hpp"

#include "epolis/error.hpp"
#include "epolis/lang/schema.hpp"

namespace epolis::rete {

using namespace lang;

namespace {

class Compiler {
 public:
  Compiler(const RuleDef& rule, Network& net) : rule_(rule), net_(net) {}

  CompiledRule run() {
    NodeId parent = kTop;
    std::size_t i = 0;
    while (i < rule_.lhs.size()) {
      if (const auto* p = std::get_if<Pattern>(&rule_.lhs[i])) {
        ++i;
        parent = p->negated ? negation(*p, parent) : positive(*p, parent, i);
      } else {
        std::vector<JoinTest> tests;
        for (; i < rule_.lhs.size() && std::holds_alternative<TestCondition>(rule_.lhs[i]); ++i)
          tests.push_back(test_ce(std::get<TestCondition>(rule_.lhs[i]), nullptr));
        parent = net_.beta_node(BetaKind::Filter, parent, kTop, std::move(tests));
      }
    }
    ProductionInfo info{rule_.name, rule_.salience, rule_.specificity(), kTop};
    out_.production = net_.add_production(std::move(info), parent);
    return std::move(out_);
  }

 private:
  struct Local {  // variables first bound inside the pattern being compiled
    std::map<std::string, std::size_t> slots;
  };

  const TemplateDef& templ(const Pattern& p, std::size_t& index) const {
    auto idx = net_.schema().index_of(p.template_name);
    if (!idx) throw Error(ErrorCode::Validation, "unknown template " + p.template_name);
    index = *idx;
    return net_.schema().at(index);
  }

  std::size_t slot_of(const TemplateDef& t, const std::string& name) const {
    auto s = t.slot_index(canonical_slot_name(t.name, name));
    if (!s) throw Error(ErrorCode::Validation, "unknown slot " + name + " in " + t.name);
    return *s;
  }

  // Splits one pattern's constraints into alpha tests and join tests.
  void split(const Pattern& p, const TemplateDef& t, std::vector<AlphaTest>& alpha,
             std::vector<JoinTest>& join, Local& local) const {
    for (const SlotConstraint& sc : p.slots) {
      std::size_t slot = slot_of(t, sc.slot);
      for (const Constraint& c : sc.constraints) {
        if (const auto* lit = std::get_if<LiteralConstraint>(&c)) {
          AlphaTest a;
          a.slot = slot;
          a.constant = coerce(lit->value, t.slots[slot].kind).value_or(lit->value);
          alpha.push_back(std::move(a));
        } else if (const auto* v = std::get_if<VariableConstraint>(&c)) {
          bind(v->name, slot, Comparator::Eq, alpha, join, local);
        } else {
          const auto& pc = std::get<PredicateConstraint>(c);
          if (const auto* val = std::get_if<Value>(&pc.operand)) {
            AlphaTest a;
            a.slot = slot;
            a.cmp = pc.cmp;
            a.constant = *val;
            alpha.push_back(std::move(a));
          } else {
            const std::string& name = std::get<Variable>(pc.operand).name;
            constrain(slot, pc.cmp, name, alpha, join, local);
          }
        }
      }
    }
  }

  // `slot` holds variable `name`: binds it on first sight, otherwise tests equality.
  void bind(const std::string& name, std::size_t slot, Comparator cmp,
            std::vector<AlphaTest>& alpha, std::vector<JoinTest>& join, Local& local) const {
    if (!out_.variables.count(name) && !local.slots.count(name)) {
      local.slots.emplace(name, slot);
      return;
    }
    constrain(slot, cmp, name, alpha, join, local);
  }

  void constrain(std::size_t slot, Comparator cmp, const std::string& name,
                 std::vector<AlphaTest>& alpha, std::vector<JoinTest>& join,
                 const Local& local) const {
    if (auto it = local.slots.find(name); it != local.slots.end()) {
      if (it->second == slot && cmp == Comparator::Eq) return;
      AlphaTest a;
      a.kind = AlphaTest::Kind::SlotSlot;
      a.slot = slot;
      a.cmp = cmp;
      a.other_slot = it->second;
      alpha.push_back(std::move(a));
      return;
    }
    auto it = out_.variables.find(name);
    if (it == out_.variables.end())
      throw Error(ErrorCode::Validation, "unbound variable ?" + name + " in rule " + rule_.name);
    JoinTest j;
    j.cmp = cmp;
    j.lhs.kind = OperandRef::Kind::RightSlot;
    j.lhs.slot = slot;
    j.rhs.kind = OperandRef::Kind::TokenSlot;
    j.rhs.token_index = it->second.token_index;
    j.rhs.slot = it->second.slot;
    join.push_back(std::move(j));
  }

  OperandRef operand(const Operand& o, const Local* right) const {
    OperandRef r;
    if (const auto* v = std::get_if<Value>(&o)) {
      r.constant = *v;
      return r;
    }
    const std::string& name = std::get<Variable>(o).name;
    if (right) {
      if (auto it = right->slots.find(name); it != right->slots.end()) {
        r.kind = OperandRef::Kind::RightSlot;
        r.slot = it->second;
        return r;
      }
    }
    auto it = out_.variables.find(name);
    if (it == out_.variables.end())
      throw Error(ErrorCode::Validation, "unbound variable ?" + name + " in rule " + rule_.name);
    r.kind = OperandRef::Kind::TokenSlot;
    r.token_index = it->second.token_index;
    r.slot = it->second.slot;
    return r;
  }

  JoinTest test_ce(const TestCondition& t, const Local* right) const {
    return JoinTest{t.cmp, operand(t.lhs, right), operand(t.rhs, right)};
  }

  // A positive pattern plus any test CEs immediately following it.
  NodeId positive(const Pattern& p, NodeId parent, std::size_t& next) {
    std::size_t index = 0;
    const TemplateDef& t = templ(p, index);
    std::vector<AlphaTest> alpha;
    std::vector<JoinTest> join;
    Local local;
    split(p, t, alpha, join, local);
    for (; next < rule_.lhs.size() && std::holds_alternative<TestCondition>(rule_.lhs[next]); ++next)
      join.push_back(test_ce(std::get<TestCondition>(rule_.lhs[next]), &local));
    NodeId a = net_.alpha_chain(index, alpha);
    NodeId node = net_.beta_node(BetaKind::Join, parent, a, std::move(join));
    for (const auto& [name, slot] : local.slots) out_.variables.emplace(name, Binding{width_, slot});
    if (p.fact_var) out_.fact_vars.emplace(*p.fact_var, width_);
    ++width_;
    return node;
  }

  NodeId negation(const Pattern& p, NodeId parent) {
    std::size_t index = 0;
    const TemplateDef& t = templ(p, index);
    std::vector<AlphaTest> alpha;
    std::vector<JoinTest> join;
    Local local;
    split(p, t, alpha, join, local);
    NodeId a = net_.alpha_chain(index, alpha);
    return net_.beta_node(BetaKind::Negation, parent, a, std::move(join));
  }

  const RuleDef& rule_;
  Network& net_;
  CompiledRule out_;
  std::size_t width_ = 0;
};

}  // namespace

CompiledRule compile_rule(const RuleDef& rule, Network& net) { return Compiler(rule, net).run(); }

}  // namespace epolis::rete
