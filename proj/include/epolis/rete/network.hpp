#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "epolis/lang/ast.hpp"
#include "epolis/lang/schema.hpp"

namespace epolis::rete {

using lang::Comparator;
using lang::Value;

// Fact ids double as logical time stamps: a later assert always has a larger id.
using FactId = std::int64_t;
using ProductionId = std::size_t;
using NodeId = int;
inline constexpr NodeId kTop = -1;  // the beta root holding the single empty token

struct Fact {
  FactId id = 0;
  std::size_t template_index = 0;
  std::vector<Value> values;
};

// One fact id per positive pattern matched so far, in LHS order.
using Token = std::vector<FactId>;

// Single-fact test evaluated in the alpha network.
struct AlphaTest {
  enum class Kind { Constant, SlotSlot };
  Kind kind = Kind::Constant;
  std::size_t slot = 0;
  Comparator cmp = Comparator::Eq;
  Value constant;
  std::size_t other_slot = 0;

  bool passes(const Fact& f) const;
  std::string describe(const lang::TemplateDef& t) const;
  friend bool operator==(const AlphaTest&, const AlphaTest&) = default;
};

struct AlphaNode {
  std::size_t template_index = 0;
  NodeId parent = kTop;  // kTop for the per-template type node
  std::optional<AlphaTest> test;
  std::vector<NodeId> children;
  std::vector<NodeId> beta_successors;
  std::set<FactId> memory;
};

// Operand of an inter-fact test: a constant, a slot of a fact already in the
// token, or a slot of the fact arriving on the right input.
struct OperandRef {
  enum class Kind { Constant, TokenSlot, RightSlot };
  Kind kind = Kind::Constant;
  Value constant;
  std::size_t token_index = 0;
  std::size_t slot = 0;
  friend bool operator==(const OperandRef&, const OperandRef&) = default;
};

struct JoinTest {
  Comparator cmp = Comparator::Eq;
  OperandRef lhs;
  OperandRef rhs;
  friend bool operator==(const JoinTest&, const JoinTest&) = default;
};

enum class BetaKind { Join, Negation, Filter, Production };

struct BetaNode {
  BetaKind kind = BetaKind::Join;
  NodeId parent = kTop;
  NodeId alpha = kTop;  // right input for Join / Negation
  std::vector<JoinTest> tests;
  std::vector<NodeId> children;
  std::size_t depth = 1;
  ProductionId production = 0;  // Production nodes only

  std::set<Token> memory;              // output tokens (not used by Production)
  std::map<Token, std::size_t> counts; // Negation: matches per parent token

  bool is_entry() const { return kind == BetaKind::Join && parent == kTop; }
};

struct ProductionInfo {
  std::string name;
  int salience = 0;
  std::size_t specificity = 0;
  NodeId node = kTop;
};

struct Activation {
  ProductionId production = 0;
  Token token;
  int salience = 0;
  FactId recency = 0;
  std::size_t specificity = 0;
};

enum class ConflictKey { SalienceDesc, RecencyDesc, SpecificityDesc, ProductionAsc };

// Ordered comparison keys for agenda selection. Production id is always
// appended as the final key; remaining ties between two tokens of the same
// production are broken by their fact ids, most recent first.
struct ConflictStrategy {
  std::vector<ConflictKey> keys{ConflictKey::SalienceDesc, ConflictKey::RecencyDesc,
                                ConflictKey::SpecificityDesc, ConflictKey::ProductionAsc};
  static ConflictStrategy standard() { return {}; }
};

struct AgendaOrder {
  ConflictStrategy strategy;
  // true when `a` should fire before `b`
  bool operator()(const Activation& a, const Activation& b) const;
};

struct VisitCounters {
  std::uint64_t alpha = 0;
  std::uint64_t beta = 0;
  std::uint64_t production = 0;
  std::uint64_t total() const { return alpha + beta + production; }
};

struct NetworkStats {
  std::size_t alpha_nodes = 0;
  std::size_t alpha_memories = 0;  // alpha nodes with at least one beta successor
  std::size_t entry_nodes = 0;
  std::size_t join_nodes = 0;
  std::size_t negation_nodes = 0;
  std::size_t filter_nodes = 0;
  std::size_t production_nodes = 0;
  std::size_t total() const {
    return alpha_nodes + entry_nodes + join_nodes + negation_nodes + filter_nodes + production_nodes;
  }
};

// Working memory plus the compiled alpha/beta network and the agenda. All
// memories are maintained incrementally as facts are inserted and removed.
class Network {
 public:
  Network(lang::Schema schema, ConflictStrategy strategy);

  const lang::Schema& schema() const { return schema_; }

  // --- construction (structural sharing of identical nodes) ---
  NodeId alpha_chain(std::size_t template_index, const std::vector<AlphaTest>& tests);
  NodeId beta_node(BetaKind kind, NodeId parent, NodeId alpha, std::vector<JoinTest> tests);
  ProductionId add_production(ProductionInfo info, NodeId parent);

  // --- working memory ---
  // Returns the id and whether the fact is new; an identical live fact is reused.
  std::pair<FactId, bool> insert_fact(std::size_t template_index, std::vector<Value> values);
  void remove_fact(FactId id);
  const Fact* fact(FactId id) const;
  const std::map<FactId, Fact>& facts() const { return facts_; }
  FactId last_fact_id() const { return next_id_ - 1; }

  // --- agenda ---
  bool agenda_empty() const { return agenda_.empty(); }
  std::size_t agenda_size() const { return agenda_.size(); }
  Activation pop_activation();
  const std::set<Activation, AgendaOrder>& agenda() const { return agenda_; }

  // --- introspection ---
  const std::vector<AlphaNode>& alpha_nodes() const { return alpha_; }
  const std::vector<BetaNode>& beta_nodes() const { return beta_; }
  const std::vector<ProductionInfo>& productions() const { return productions_; }
  NetworkStats stats() const;
  std::string dump() const;
  VisitCounters& counters() { return counters_; }
  const VisitCounters& counters() const { return counters_; }

  // Recomputes every memory from scratch and reports mismatches (empty == sound).
  std::vector<std::string> verify() const;

 private:
  const std::set<Token>& parent_tokens(NodeId parent) const;
  bool alpha_passes(NodeId a, const Fact& f) const;
  bool tests_pass(const BetaNode& n, const Token& token, const Fact* right) const;
  Value operand(const OperandRef& ref, const Token& token, const Fact* right) const;
  Activation make_activation(ProductionId p, const Token& token) const;

  void collect_alpha(NodeId a, const Fact& f, std::vector<NodeId>& passed);
  void initialize_node(NodeId id);
  void left_activate(NodeId id, const Token& token);
  void left_remove(NodeId id, const Token& token);
  void right_activate(NodeId id, const Fact& f);
  void right_remove(NodeId id, const Fact& f);
  void emit(NodeId id, const Token& token);
  void retire(NodeId id, const Token& token);

  lang::Schema schema_;
  std::vector<AlphaNode> alpha_;
  std::vector<NodeId> type_nodes_;  // per template index, kTop when absent
  std::vector<BetaNode> beta_;
  std::vector<ProductionInfo> productions_;

  std::map<FactId, Fact> facts_;
  std::map<std::pair<std::size_t, std::vector<Value>>, FactId> identical_;
  std::map<FactId, std::vector<NodeId>> fact_alpha_;  // alpha memories holding each fact
  FactId next_id_ = 1;

  std::set<Activation, AgendaOrder> agenda_;
  VisitCounters counters_;
};

}  // namespace epolis::rete
