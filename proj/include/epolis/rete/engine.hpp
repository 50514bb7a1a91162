#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "epolis/lang/ast.hpp"
#include "epolis/lang/schema.hpp"
#include "epolis/rete/compiler.hpp"
#include "epolis/rete/network.hpp"

namespace epolis::rete {

struct RuleError {
  std::string rule;
  std::string message;
};

struct RunResult {
  std::size_t firings = 0;
  bool limit_hit = false;  // the agenda was still non-empty when the limit stopped the run
  std::vector<RuleError> errors;
};

// Observer hooks, called synchronously on the engine's thread. `rule` is empty
// for facts asserted or retracted from outside a firing.
class Listener {
 public:
  virtual ~Listener() = default;
  virtual void on_assert(const Fact&, const std::string& /*rule*/) {}
  virtual void on_retract(const Fact&, const std::string& /*rule*/) {}
  virtual void on_fire(const std::string& /*rule*/, const Token&) {}
  virtual void on_emit(const std::string& /*text*/) {}
};

using SlotUpdates = std::vector<std::pair<std::string, lang::Value>>;

class Engine {
 public:
  explicit Engine(lang::Schema schema = lang::Schema::builtin(),
                  ConflictStrategy strategy = ConflictStrategy::standard());

  const lang::Schema& schema() const { return net_.schema(); }

  // Rules must validate against the schema; names are unique per engine.
  ProductionId add_rule(const lang::RuleDef& rule);
  void add_rules(const std::vector<lang::RuleDef>& rules);
  bool has_rule(const std::string& name) const;
  const std::vector<lang::RuleDef>& rules() const { return rules_; }

  // Slot values in template order; kinds are checked and coerced.
  FactId assert_fact(const std::string& template_name, std::vector<lang::Value> values);
  FactId assert_fact(const lang::FactLiteral& literal);
  // Named slots; missing slots take the kind's default.
  FactId assert_slots(const std::string& template_name, const SlotUpdates& slots);
  void retract(FactId id);
  FactId modify(FactId id, const SlotUpdates& updates);

  RunResult run(std::optional<std::size_t> max_firings = std::nullopt);

  const Fact* fact(FactId id) const { return net_.fact(id); }
  const std::map<FactId, Fact>& facts() const { return net_.facts(); }
  std::vector<const Fact*> facts_of(const std::string& template_name) const;
  const lang::Value& slot(const Fact& f, const std::string& slot) const;
  std::string format_fact(const Fact& f) const;

  // Text produced by printout actions since construction (or the last take).
  const std::string& output() const { return output_; }
  std::string take_output();

  void add_listener(Listener* l) { listeners_.push_back(l); }
  void remove_listener(Listener* l);

  Network& network() { return net_; }
  const Network& network() const { return net_; }

  // Complete engine state. A snapshot only restores into an engine holding the
  // same rule set it was taken from.
  struct Snapshot {
    int format = 0;
    std::size_t rule_version = 0;
    std::shared_ptr<const Network> net;
    std::string output;
  };
  static constexpr int kSnapshotFormat = 1;
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

 private:
  std::vector<lang::Value> checked_values(const lang::TemplateDef& t,
                                          std::vector<lang::Value> values) const;
  FactId do_assert(std::size_t template_index, std::vector<lang::Value> values,
                   const std::string& rule);
  void do_retract(FactId id, const std::string& rule);
  bool fire(const Activation& a, std::vector<RuleError>& errors);

  Network net_;
  std::vector<lang::RuleDef> rules_;
  std::vector<CompiledRule> compiled_;  // indexed by production id
  std::string output_;
  std::vector<Listener*> listeners_;
};

}  // namespace epolis::rete
