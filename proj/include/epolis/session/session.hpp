#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "epolis/city/layout.hpp"
#include "epolis/city/state.hpp"
#include "epolis/kb/knowledge_base.hpp"
#include "epolis/store/event_log.hpp"

namespace epolis::session {

enum class Phase { Roaming, InDilemma, Voting, Done };
std::string_view to_string(Phase p);

enum class ActionKind {
  EnableDefaultInstance,
  TransportToDilemma,
  TransportBack,
  TransportToViewFromAbove,
  OpenVote,
  FlagAbnormal,
};
std::string_view to_string(ActionKind k);

struct FlowAction {
  ActionKind kind = ActionKind::EnableDefaultInstance;
  std::int64_t sid = 0;      // EnableDefaultInstance
  std::int64_t did = 0;      // TransportToDilemma
  city::Vec3 position;       // transports
  std::string abnormal;      // FlagAbnormal

  friend bool operator==(const FlowAction&, const FlowAction&) = default;
};
nlohmann::json to_json(const FlowAction& a);

struct Transform {
  std::int64_t sid = 0;
  std::int64_t pid = 0;
  std::int64_t siid = 0;
  friend bool operator==(const Transform&, const Transform&) = default;
};

// What one command did.
struct Outcome {
  std::vector<FlowAction> actions;
  std::vector<Transform> transforms;
  std::vector<std::string> warnings;
};

enum class Intent { PassesBy, Visits };
std::string_view to_string(Intent i);

struct IntentClassification {
  std::int64_t uid = 0;
  std::int64_t sid = 0;
  Intent intent = Intent::PassesBy;
  std::int64_t dwell = 0;  // longest outer-zone visit, ms
  bool reached_inner = false;
};

struct SessionOptions {
  std::int64_t visit_dwell = 10'000;  // ms, inclusive
  std::size_t compact_every = 1'000;  // events between knowledge-base compactions, 0 = never
  kb::KbOptions kb;
};

// Derived records (zone changes, dilemma openings, transformations) the
// session wants written after the command that caused them.
using RecordSink = std::function<void(store::RecordKind, std::int64_t logical, nlohmann::json payload)>;

// One player's game. Movement arrives as position samples; zone changes are
// computed per sample against the layout.
class PlayerSession {
 public:
  PlayerSession(std::string id, std::int64_t uid, const city::CityLayout& layout, city::Vec3 spawn, std::int64_t t,
                SessionOptions options = {});

  Outcome step_movement(const city::Vec3& p, std::int64_t t);
  // `cid` empty is the player pressing Continue without selecting anything.
  Outcome submit_choice(std::int64_t did, std::optional<std::int64_t> cid, std::int64_t t);
  Outcome submit_vote(std::int64_t verdict, std::int64_t t);
  Outcome check_inactivity(std::int64_t now);
  IntentClassification classify_intent(std::int64_t sid) const;

  const std::string& id() const { return id_; }
  std::int64_t uid() const { return uid_; }
  Phase phase() const { return phase_; }
  std::optional<std::int64_t> dilemma() const { return current_did_; }
  const city::Vec3& position() const { return position_; }
  const std::optional<city::Vec3>& return_pose() const { return return_pose_; }
  const std::set<std::int64_t>& answered() const { return answered_; }
  std::optional<std::int64_t> verdict() const { return verdict_; }
  std::int64_t clock() const { return clock_; }
  const city::CityState& city() const { return city_; }
  const city::CityLayout& layout() const { return *layout_; }
  const kb::KnowledgeBase& kb() const { return *kb_; }
  // Block the player stands in and whether inside its inner zone.
  std::optional<std::int64_t> current_block() const { return zone_sid_; }
  bool in_inner() const { return zone_inner_; }

  void set_record_sink(RecordSink sink) { sink_ = std::move(sink); }
  void watch_flags(kb::KnowledgeBase::FlagWatcher w) { kb_->watch_flags(std::move(w)); }

 private:
  void advance(std::int64_t t);
  void emit(store::RecordKind kind, nlohmann::json payload);
  std::int64_t enabled_siid(std::int64_t sid) const;
  void after_event();

  std::string id_;
  std::int64_t uid_;
  const city::CityLayout* layout_;
  SessionOptions options_;
  std::unique_ptr<kb::KnowledgeBase> kb_;
  city::CityState city_;
  Phase phase_ = Phase::Roaming;
  std::optional<std::int64_t> current_did_;
  city::Vec3 position_;
  std::optional<city::Vec3> return_pose_;
  std::set<std::int64_t> answered_;
  std::optional<std::int64_t> verdict_;
  std::int64_t clock_ = 0;
  std::optional<std::int64_t> zone_sid_;
  bool zone_inner_ = false;
  std::size_t events_since_compact_ = 0;
  RecordSink sink_;
  Outcome* pending_ = nullptr;  // receives abnormal-behaviour flags during a command
};

// The point from which the finished city is shown.
city::Vec3 view_from_above(const city::CityLayout& layout);

}  // namespace epolis::session
