#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "epolis/lang/ast.hpp"
#include "epolis/rete/engine.hpp"

namespace epolis::kb {

enum class Layer { Sensor, Deductive, Historical };
Layer layer_of(const std::string& template_name);

enum class Zone { Outer, Inner };
enum class EventKind { Position, Enter, Exit, Choice, Vote };

std::string_view to_string(Zone z);
std::string_view to_string(EventKind k);

// One sensor-layer observation. Which fields matter depends on `kind`.
struct SalEvent {
  EventKind kind = EventKind::Position;
  std::int64_t uid = 0;
  std::int64_t time = 0;
  double x = 0, y = 0, z = 0;
  std::int64_t sid = 0;
  Zone zone = Zone::Outer;
  std::int64_t did = 0;
  std::int64_t cid = 0;
  std::int64_t verdict = 0;
  std::int64_t siid = 0;  // exits: instance enabled during the visit

  static SalEvent position(std::int64_t uid, std::int64_t t, double x, double y, double z = 0);
  static SalEvent enter(std::int64_t uid, std::int64_t t, std::int64_t sid, Zone zone);
  static SalEvent exit(std::int64_t uid, std::int64_t t, std::int64_t sid, Zone zone,
                       std::int64_t siid = 0);
  static SalEvent choice(std::int64_t uid, std::int64_t t, std::int64_t did, std::int64_t cid);
  static SalEvent vote(std::int64_t uid, std::int64_t t, std::int64_t verdict);
};

// A fact that became true, attributed to the query whose rule derived it. Facts
// the knowledge base asserts itself (intervals, flags, transformations) carry
// the query name "kb".
struct Derivation {
  std::string query;
  std::string rule;
  rete::FactId id = 0;
  lang::FactLiteral fact;
  std::int64_t time = 0;
};
using Callback = std::function<void(const Derivation&)>;

struct RecurringQuery {
  std::string name;
  std::vector<lang::RuleDef> rules;
  std::vector<Callback> callbacks;
};

struct Thresholds {
  std::size_t re_entry_count = 3;
  std::int64_t re_entry_window = 60'000;
  std::int64_t inactivity = 120'000;
  std::size_t repeated_choice = 3;
  std::size_t reversal_count = 8;
  std::int64_t reversal_window = 30'000;
};

// Per-template retention for sensor facts. Facts sharing the key slots form a
// group; within a group the oldest go first.
struct Retention {
  std::vector<std::string> key;
  std::optional<std::size_t> keep_last;
  std::optional<std::int64_t> max_age;
};
struct CompactionPolicy {
  std::map<std::string, Retention> templates;
  static CompactionPolicy standard();
};

enum class IntervalKind { Location, Nested, Dilemma };

struct PrevailingChoice {
  std::int64_t choice = 0;
  std::int64_t count = 0;
  std::int64_t start_time = 0;
  bool tie = false;  // another choice has the same count
};

struct KbOptions {
  bool builtin_program = true;
  Thresholds thresholds;
  CompactionPolicy compaction = CompactionPolicy::standard();
};

class KnowledgeBase : private rete::Listener {
 public:
  explicit KnowledgeBase(KbOptions options = {});
  ~KnowledgeBase() override;
  KnowledgeBase(const KnowledgeBase&) = delete;
  KnowledgeBase& operator=(const KnowledgeBase&) = delete;

  // Static city description (locations, dilemmas, doctrine mappings). Known
  // sids and dids are taken from these facts.
  void load_static(const std::vector<lang::FactLiteral>& facts);
  void add_user(std::int64_t uid);
  bool has_user(std::int64_t uid) const { return users_.count(uid) != 0; }

  // Asserts the sensor fact, runs to quiescence, closes any interval the event
  // ends and delivers callbacks. Returns the id of the sensor fact.
  rete::FactId assert_event(const SalEvent& e);

  // Any other fact (deductive facts from outside, fixtures). Runs afterwards.
  rete::FactId assert_fact(const lang::FactLiteral& f);
  void retract_fact(rete::FactId id);

  void register_recurring_query(RecurringQuery q);
  bool has_query(const std::string& name) const;
  std::vector<std::string> query_names() const;
  void subscribe(Callback cb) { subscribers_.push_back(std::move(cb)); }

  // Moves the open interval for (uid, key) into the historical layer. `key` is
  // a sid, nested rid or did depending on `kind`. Returns the historical fact,
  // or nothing (and an anomaly entry) when no interval is open.
  std::optional<rete::FactId> close_interval(IntervalKind kind, std::int64_t uid, std::int64_t key,
                                             std::int64_t end_time, std::int64_t siid = 0);

  // A Smart Spatial Type changed its enabled instance.
  rete::FactId record_transformation(std::int64_t sid, std::int64_t pid, std::int64_t time);

  // Retracts sensor facts outside the retention policy, in ascending sequence
  // order. Returns how many were removed.
  std::size_t compact(std::int64_t now);
  void check_inactivity(std::int64_t now);

  std::map<std::int64_t, std::int64_t> choice_counts(std::int64_t did) const;
  // Throws when nobody has answered `did`.
  PrevailingChoice prevailing_choice(std::int64_t did) const;
  std::optional<std::int64_t> prevailing_verdict() const;

  // Boolean mirrors of selected deductive facts, keyed like
  // "dilemma.<did>.answered.<uid>".
  std::map<std::string, bool> export_flags(const std::string& prefix = "") const;
  using FlagWatcher = std::function<void(const std::map<std::string, bool>& changed)>;
  void watch_flags(FlagWatcher w) { flag_watchers_.push_back(std::move(w)); }

  std::vector<const rete::Fact*> query(const std::string& template_name,
                                       const rete::SlotUpdates& equal = {}) const;
  lang::FactLiteral literal(const rete::Fact& f) const;
  std::int64_t int_slot(const rete::Fact& f, const std::string& slot) const;

  const std::vector<std::string>& anomalies() const { return anomalies_; }
  const std::vector<rete::RuleError>& rule_errors() const { return rule_errors_; }
  std::int64_t last_seq() const { return seq_; }
  std::int64_t now() const { return clock_; }

  rete::Engine& engine() { return engine_; }
  const rete::Engine& engine() const { return engine_; }

 private:
  void on_assert(const rete::Fact& f, const std::string& rule) override;
  void on_retract(const rete::Fact& f, const std::string& rule) override;

  void settle();
  void deliver();
  void check_event(const SalEvent& e) const;
  rete::FactId assert_native(const std::string& template_name, rete::SlotUpdates slots);
  std::optional<rete::FactId> close(IntervalKind kind, std::int64_t uid, std::int64_t key,
                              std::int64_t end_time, std::int64_t siid, bool report_missing);
  std::int64_t resolve_siid(std::int64_t sid) const;
  void flag(std::int64_t uid, const std::string& kind, std::int64_t time);
  void detect(const SalEvent& e);
  std::optional<std::string> flag_key(const rete::Fact& f) const;

  KbOptions options_;
  rete::Engine engine_;
  std::map<std::string, RecurringQuery> queries_;
  std::map<std::string, std::string> rule_query_;
  std::vector<Callback> subscribers_;
  std::vector<FlagWatcher> flag_watchers_;

  std::set<std::int64_t> users_, sids_, dids_;
  std::map<std::int64_t, std::int64_t> dilemma_sid_, nested_rid_;
  std::int64_t seq_ = 0;
  std::int64_t clock_ = 0;
  std::map<std::int64_t, std::int64_t> user_clock_;

  std::vector<Derivation> pending_;
  std::map<std::string, int> flag_support_;
  std::map<std::string, bool> flags_;
  std::set<std::string> touched_flags_;
  bool native_ = false;
  std::vector<std::string> anomalies_;
  std::vector<rete::RuleError> rule_errors_;

  struct Motion {
    bool has_pos = false;
    double x = 0, y = 0, z = 0;
    bool has_dir = false;
    double dx = 0, dy = 0, dz = 0;
    std::deque<std::int64_t> reversals;
  };
  std::map<std::int64_t, Motion> motion_;
  std::map<std::pair<std::int64_t, std::int64_t>, std::deque<std::int64_t>> entries_;
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> answers_;
  std::set<std::int64_t> inactive_flagged_;
};

}  // namespace epolis::kb
