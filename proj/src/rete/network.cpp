#include "epolis/rete/network.hpp"

#include <algorithm>
#include <sstream>

namespace epolis::rete {

using lang::holds;

bool AlphaTest::passes(const Fact& f) const {
  const Value& v = f.values[slot];
  if (kind == Kind::Constant) return holds(cmp, v, constant);
  return holds(cmp, v, f.values[other_slot]);
}

std::string AlphaTest::describe(const lang::TemplateDef& t) const {
  std::string out = t.slots[slot].name + " " + std::string(lang::to_string(cmp)) + " ";
  if (kind == Kind::Constant) return out + lang::format_value(constant);
  return out + t.slots[other_slot].name;
}

namespace {

Token sorted_desc(const Token& t) {
  Token s = t;
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

}  // namespace

bool AgendaOrder::operator()(const Activation& a, const Activation& b) const {
  for (ConflictKey k : strategy.keys) {
    switch (k) {
      case ConflictKey::SalienceDesc:
        if (a.salience != b.salience) return a.salience > b.salience;
        break;
      case ConflictKey::RecencyDesc:
        if (a.recency != b.recency) return a.recency > b.recency;
        break;
      case ConflictKey::SpecificityDesc:
        if (a.specificity != b.specificity) return a.specificity > b.specificity;
        break;
      case ConflictKey::ProductionAsc:
        if (a.production != b.production) return a.production < b.production;
        break;
    }
  }
  if (a.production != b.production) return a.production < b.production;
  Token sa = sorted_desc(a.token), sb = sorted_desc(b.token);
  if (sa != sb) return sa > sb;
  return a.token < b.token;
}

Network::Network(lang::Schema schema, ConflictStrategy strategy)
    : schema_(std::move(schema)),
      type_nodes_(schema_.size(), kTop),
      agenda_(AgendaOrder{std::move(strategy)}) {}

// ------------------------------------------------------------ construction --

NodeId Network::alpha_chain(std::size_t template_index, const std::vector<AlphaTest>& tests) {
  NodeId node = type_nodes_.at(template_index);
  if (node == kTop) {
    node = static_cast<NodeId>(alpha_.size());
    AlphaNode root;
    root.template_index = template_index;
    for (const auto& [id, f] : facts_)
      if (f.template_index == template_index) {
        root.memory.insert(id);
        fact_alpha_[id].push_back(node);
      }
    alpha_.push_back(std::move(root));
    type_nodes_[template_index] = node;
  }
  for (const AlphaTest& test : tests) {
    NodeId next = kTop;
    for (NodeId c : alpha_[node].children)
      if (alpha_[c].test == test) next = c;
    if (next == kTop) {
      next = static_cast<NodeId>(alpha_.size());
      AlphaNode child;
      child.template_index = template_index;
      child.parent = node;
      child.test = test;
      for (FactId id : alpha_[node].memory)
        if (test.passes(facts_.at(id))) {
          child.memory.insert(id);
          fact_alpha_[id].push_back(next);
        }
      alpha_.push_back(std::move(child));
      alpha_[node].children.push_back(next);
    }
    node = next;
  }
  return node;
}

NodeId Network::beta_node(BetaKind kind, NodeId parent, NodeId alpha, std::vector<JoinTest> tests) {
  const std::vector<NodeId>* siblings = nullptr;
  std::vector<NodeId> top_children;
  if (parent == kTop) {
    for (NodeId i = 0; i < static_cast<NodeId>(beta_.size()); ++i)
      if (beta_[i].parent == kTop) top_children.push_back(i);
    siblings = &top_children;
  } else {
    siblings = &beta_[parent].children;
  }
  for (NodeId c : *siblings) {
    const BetaNode& n = beta_[c];
    if (n.kind == kind && n.alpha == alpha && n.tests == tests && kind != BetaKind::Production)
      return c;
  }
  NodeId id = static_cast<NodeId>(beta_.size());
  BetaNode node;
  node.kind = kind;
  node.parent = parent;
  node.alpha = alpha;
  node.tests = std::move(tests);
  node.depth = parent == kTop ? 1 : beta_[parent].depth + 1;
  beta_.push_back(std::move(node));
  if (parent != kTop) beta_[parent].children.push_back(id);
  if (alpha != kTop) {
    auto& succ = alpha_[alpha].beta_successors;
    succ.push_back(id);
    std::stable_sort(succ.begin(), succ.end(),
                     [&](NodeId a, NodeId b) { return beta_[a].depth > beta_[b].depth; });
  }
  initialize_node(id);
  return id;
}

ProductionId Network::add_production(ProductionInfo info, NodeId parent) {
  ProductionId pid = productions_.size();
  NodeId id = static_cast<NodeId>(beta_.size());
  BetaNode node;
  node.kind = BetaKind::Production;
  node.parent = parent;
  node.depth = parent == kTop ? 1 : beta_[parent].depth + 1;
  node.production = pid;
  beta_.push_back(std::move(node));
  if (parent != kTop) beta_[parent].children.push_back(id);
  info.node = id;
  productions_.push_back(std::move(info));
  initialize_node(id);
  return pid;
}

void Network::initialize_node(NodeId id) {
  const BetaNode& n = beta_[id];
  const auto tokens = parent_tokens(n.parent);  // copy: children may be appended below
  for (const Token& t : tokens) left_activate(id, t);
}

// ---------------------------------------------------------------- matching --

const std::set<Token>& Network::parent_tokens(NodeId parent) const {
  static const std::set<Token> top{Token{}};
  return parent == kTop ? top : beta_[parent].memory;
}

bool Network::alpha_passes(NodeId a, const Fact& f) const {
  for (NodeId n = a; n != kTop; n = alpha_[n].parent)
    if (alpha_[n].test && !alpha_[n].test->passes(f)) return false;
  return true;
}

Value Network::operand(const OperandRef& ref, const Token& token, const Fact* right) const {
  switch (ref.kind) {
    case OperandRef::Kind::Constant: return ref.constant;
    case OperandRef::Kind::TokenSlot: return facts_.at(token[ref.token_index]).values[ref.slot];
    case OperandRef::Kind::RightSlot: return right->values[ref.slot];
  }
  return ref.constant;
}

bool Network::tests_pass(const BetaNode& n, const Token& token, const Fact* right) const {
  for (const JoinTest& t : n.tests)
    if (!holds(t.cmp, operand(t.lhs, token, right), operand(t.rhs, token, right))) return false;
  return true;
}

Activation Network::make_activation(ProductionId p, const Token& token) const {
  Activation a;
  a.production = p;
  a.token = token;
  a.salience = productions_[p].salience;
  a.specificity = productions_[p].specificity;
  a.recency = token.empty() ? 0 : *std::max_element(token.begin(), token.end());
  return a;
}

// Adds `token` to the output of node `id` and passes it on.
void Network::emit(NodeId id, const Token& token) {
  if (!beta_[id].memory.insert(token).second) return;
  for (NodeId c : beta_[id].children) left_activate(c, token);
}

// Removes `token` from the output of node `id` and everything derived from it.
void Network::retire(NodeId id, const Token& token) {
  if (beta_[id].memory.erase(token) == 0) return;
  for (NodeId c : beta_[id].children) left_remove(c, token);
}

void Network::left_activate(NodeId id, const Token& token) {
  BetaNode& n = beta_[id];
  switch (n.kind) {
    case BetaKind::Production:
      ++counters_.production;
      agenda_.insert(make_activation(n.production, token));
      return;
    case BetaKind::Filter:
      ++counters_.beta;
      if (tests_pass(n, token, nullptr)) emit(id, token);
      return;
    case BetaKind::Join: {
      ++counters_.beta;
      const auto mem = alpha_[n.alpha].memory;
      for (FactId fid : mem) {
        const Fact& f = facts_.at(fid);
        if (!tests_pass(beta_[id], token, &f)) continue;
        Token ext = token;
        ext.push_back(fid);
        emit(id, ext);
      }
      return;
    }
    case BetaKind::Negation: {
      ++counters_.beta;
      std::size_t count = 0;
      for (FactId fid : alpha_[n.alpha].memory)
        if (tests_pass(n, token, &facts_.at(fid))) ++count;
      n.counts[token] = count;
      if (count == 0) emit(id, token);
      return;
    }
  }
}

void Network::left_remove(NodeId id, const Token& token) {
  BetaNode& n = beta_[id];
  switch (n.kind) {
    case BetaKind::Production:
      agenda_.erase(make_activation(n.production, token));
      return;
    case BetaKind::Filter:
      retire(id, token);
      return;
    case BetaKind::Negation:
      n.counts.erase(token);
      retire(id, token);
      return;
    case BetaKind::Join: {
      // Extensions of `token` are contiguous in the ordered memory.
      std::vector<Token> doomed;
      for (auto it = n.memory.lower_bound(token); it != n.memory.end(); ++it) {
        if (it->size() != token.size() + 1 || !std::equal(token.begin(), token.end(), it->begin()))
          break;
        doomed.push_back(*it);
      }
      for (const Token& t : doomed) retire(id, t);
      return;
    }
  }
}

void Network::right_activate(NodeId id, const Fact& f) {
  ++counters_.beta;
  BetaNode& n = beta_[id];
  const auto tokens = parent_tokens(n.parent);
  if (n.kind == BetaKind::Join) {
    for (const Token& t : tokens) {
      if (!tests_pass(beta_[id], t, &f)) continue;
      Token ext = t;
      ext.push_back(f.id);
      emit(id, ext);
    }
  } else if (n.kind == BetaKind::Negation) {
    for (const Token& t : tokens) {
      if (!tests_pass(beta_[id], t, &f)) continue;
      if (beta_[id].counts[t]++ == 0) retire(id, t);
    }
  }
}

void Network::right_remove(NodeId id, const Fact& f) {
  ++counters_.beta;
  BetaNode& n = beta_[id];
  const auto tokens = parent_tokens(n.parent);
  if (n.kind == BetaKind::Join) {
    for (const Token& t : tokens) {
      Token ext = t;
      ext.push_back(f.id);
      retire(id, ext);
    }
  } else if (n.kind == BetaKind::Negation) {
    for (const Token& t : tokens) {
      if (!tests_pass(beta_[id], t, &f)) continue;
      auto it = beta_[id].counts.find(t);
      if (it == beta_[id].counts.end() || it->second == 0) continue;
      if (--it->second == 0) emit(id, t);
    }
  }
}

void Network::collect_alpha(NodeId a, const Fact& f, std::vector<NodeId>& passed) {
  ++counters_.alpha;
  AlphaNode& n = alpha_[a];
  if (n.test && !n.test->passes(f)) return;
  n.memory.insert(f.id);
  fact_alpha_[f.id].push_back(a);
  passed.push_back(a);
  for (NodeId c : n.children) collect_alpha(c, f, passed);
}

std::pair<FactId, bool> Network::insert_fact(std::size_t template_index, std::vector<Value> values) {
  auto key = std::make_pair(template_index, values);
  if (auto it = identical_.find(key); it != identical_.end()) return {it->second, false};
  FactId id = next_id_++;
  identical_.emplace(std::move(key), id);
  Fact& f = facts_.emplace(id, Fact{id, template_index, std::move(values)}).first->second;

  NodeId root = type_nodes_[template_index];
  if (root == kTop) return {id, true};
  std::vector<NodeId> passed;
  collect_alpha(root, f, passed);
  // Descendants before ancestors, so a token is never matched twice against `f`.
  std::vector<NodeId> successors;
  for (NodeId a : passed)
    successors.insert(successors.end(), alpha_[a].beta_successors.begin(),
                      alpha_[a].beta_successors.end());
  std::stable_sort(successors.begin(), successors.end(),
                   [&](NodeId a, NodeId b) { return beta_[a].depth > beta_[b].depth; });
  for (NodeId b : successors) right_activate(b, f);
  return {id, true};
}

void Network::remove_fact(FactId id) {
  auto it = facts_.find(id);
  if (it == facts_.end()) return;
  const Fact f = it->second;
  std::vector<NodeId> holding;
  if (auto h = fact_alpha_.find(id); h != fact_alpha_.end()) {
    holding = std::move(h->second);
    fact_alpha_.erase(h);
  }
  for (NodeId a : holding) alpha_[a].memory.erase(id);
  facts_.erase(it);
  identical_.erase(std::make_pair(f.template_index, f.values));
  // Ancestors before descendants: tokens containing `f` disappear top-down.
  std::vector<NodeId> successors;
  for (NodeId a : holding)
    successors.insert(successors.end(), alpha_[a].beta_successors.begin(),
                      alpha_[a].beta_successors.end());
  std::stable_sort(successors.begin(), successors.end(),
                   [&](NodeId a, NodeId b) { return beta_[a].depth < beta_[b].depth; });
  for (NodeId b : successors) right_remove(b, f);
}

const Fact* Network::fact(FactId id) const {
  auto it = facts_.find(id);
  return it == facts_.end() ? nullptr : &it->second;
}

Activation Network::pop_activation() {
  auto it = agenda_.begin();
  Activation a = *it;
  agenda_.erase(it);
  return a;
}

// ----------------------------------------------------------- introspection --

NetworkStats Network::stats() const {
  NetworkStats s;
  s.alpha_nodes = alpha_.size();
  for (const auto& a : alpha_)
    if (!a.beta_successors.empty()) ++s.alpha_memories;
  for (const auto& b : beta_) {
    switch (b.kind) {
      case BetaKind::Join: (b.is_entry() ? s.entry_nodes : s.join_nodes)++; break;
      case BetaKind::Negation: ++s.negation_nodes; break;
      case BetaKind::Filter: ++s.filter_nodes; break;
      case BetaKind::Production: ++s.production_nodes; break;
    }
  }
  return s;
}

namespace {

std::string describe_operand(const OperandRef& r) {
  switch (r.kind) {
    case OperandRef::Kind::Constant: return lang::format_value(r.constant);
    case OperandRef::Kind::TokenSlot:
      return "t[" + std::to_string(r.token_index) + "]." + std::to_string(r.slot);
    case OperandRef::Kind::RightSlot: return "right." + std::to_string(r.slot);
  }
  return "?";
}

}  // namespace

std::string Network::dump() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    const AlphaNode& a = alpha_[i];
    const auto& t = schema_.at(a.template_index);
    out << "a" << i << " " << (a.test ? "alpha" : "type") << " " << t.name;
    if (a.parent != kTop) out << " parent=a" << a.parent;
    if (a.test) out << " [" << a.test->describe(t) << "]";
    out << " mem=" << a.memory.size();
    for (NodeId b : a.beta_successors) out << " ->b" << b;
    out << "\n";
  }
  for (std::size_t i = 0; i < beta_.size(); ++i) {
    const BetaNode& b = beta_[i];
    out << "b" << i << " ";
    switch (b.kind) {
      case BetaKind::Join: out << (b.is_entry() ? "entry" : "join"); break;
      case BetaKind::Negation: out << "not"; break;
      case BetaKind::Filter: out << "filter"; break;
      case BetaKind::Production: out << "production " << productions_[b.production].name; break;
    }
    out << " parent=" << (b.parent == kTop ? std::string("top") : "b" + std::to_string(b.parent));
    if (b.alpha != kTop) out << " right=a" << b.alpha;
    if (!b.tests.empty()) {
      out << " [";
      for (std::size_t k = 0; k < b.tests.size(); ++k) {
        if (k) out << ", ";
        out << describe_operand(b.tests[k].lhs) << " " << lang::to_string(b.tests[k].cmp) << " "
            << describe_operand(b.tests[k].rhs);
      }
      out << "]";
    }
    if (b.kind != BetaKind::Production) out << " mem=" << b.memory.size();
    out << "\n";
  }
  return out.str();
}

std::vector<std::string> Network::verify() const {
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    std::set<FactId> expect;
    for (const auto& [id, f] : facts_)
      if (f.template_index == alpha_[i].template_index && alpha_passes(static_cast<NodeId>(i), f))
        expect.insert(id);
    if (expect != alpha_[i].memory) problems.push_back("alpha memory a" + std::to_string(i));
  }
  std::vector<std::set<Token>> recomputed(beta_.size());
  static const std::set<Token> top{Token{}};
  for (std::size_t i = 0; i < beta_.size(); ++i) {  // parents always precede children
    const BetaNode& n = beta_[i];
    const std::set<Token>& in = n.parent == kTop ? top : recomputed[n.parent];
    std::set<Token>& out = recomputed[i];
    for (const Token& t : in) {
      switch (n.kind) {
        case BetaKind::Join:
          for (FactId fid : alpha_[n.alpha].memory)
            if (tests_pass(n, t, &facts_.at(fid))) {
              Token ext = t;
              ext.push_back(fid);
              out.insert(ext);
            }
          break;
        case BetaKind::Negation: {
          bool blocked = false;
          for (FactId fid : alpha_[n.alpha].memory)
            blocked = blocked || tests_pass(n, t, &facts_.at(fid));
          if (!blocked) out.insert(t);
          break;
        }
        case BetaKind::Filter:
          if (tests_pass(n, t, nullptr)) out.insert(t);
          break;
        case BetaKind::Production: break;
      }
    }
    if (n.kind != BetaKind::Production && out != n.memory)
      problems.push_back("beta memory b" + std::to_string(i));
  }
  return problems;
}

}  // namespace epolis::rete
