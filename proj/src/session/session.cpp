#include "epolis/session/session.hpp"

#include <algorithm>

#include "epolis/error.hpp"

namespace epolis::session {

using city::Vec3;
using store::RecordKind;
using nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

// Collects abnormal-behaviour flags into the outcome of the running command.
struct Capture {
  Outcome*& slot;
  Capture(Outcome*& s, Outcome& out) : slot(s) { slot = &out; }
  ~Capture() { slot = nullptr; }
};

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Roaming: return "roaming";
    case Phase::InDilemma: return "in-dilemma";
    case Phase::Voting: return "voting";
    case Phase::Done: return "done";
  }
  return "?";
}

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::EnableDefaultInstance: return "enable-default-instance";
    case ActionKind::TransportToDilemma: return "transport-to-dilemma";
    case ActionKind::TransportBack: return "transport-back";
    case ActionKind::TransportToViewFromAbove: return "transport-to-view-from-above";
    case ActionKind::OpenVote: return "open-vote";
    case ActionKind::FlagAbnormal: return "flag-abnormal";
  }
  return "?";
}

std::string_view to_string(Intent i) { return i == Intent::Visits ? "visits" : "passes-by"; }

json to_json(const FlowAction& a) {
  json j = {{"action", std::string(to_string(a.kind))}};
  switch (a.kind) {
    case ActionKind::EnableDefaultInstance: j["sid"] = a.sid; break;
    case ActionKind::TransportToDilemma:
      j["did"] = a.did;
      j["position"] = vec(a.position);
      break;
    case ActionKind::TransportBack:
    case ActionKind::TransportToViewFromAbove: j["position"] = vec(a.position); break;
    case ActionKind::FlagAbnormal: j["kind"] = a.abnormal; break;
    case ActionKind::OpenVote: break;
  }
  return j;
}

Vec3 view_from_above(const city::CityLayout& layout) {
  double x0 = 0, x1 = 0, z0 = 0, z1 = 0;
  bool first = true;
  for (const auto& b : layout.blocks()) {
    const auto& o = b.composite.outer();
    double lo_x = o.centre.x - o.half.x, hi_x = o.centre.x + o.half.x;
    double lo_z = o.centre.z - o.half.z, hi_z = o.centre.z + o.half.z;
    x0 = first ? lo_x : std::min(x0, lo_x);
    x1 = first ? hi_x : std::max(x1, hi_x);
    z0 = first ? lo_z : std::min(z0, lo_z);
    z1 = first ? hi_z : std::max(z1, hi_z);
    first = false;
  }
  return Vec3{(x0 + x1) / 2, 1.5 * std::max(x1 - x0, z1 - z0) + 200, (z0 + z1) / 2};
}

PlayerSession::PlayerSession(std::string id, std::int64_t uid, const city::CityLayout& layout, Vec3 spawn,
                             std::int64_t t, SessionOptions options)
    : id_(std::move(id)),
      uid_(uid),
      layout_(&layout),
      options_(std::move(options)),
      kb_(std::make_unique<kb::KnowledgeBase>(options_.kb)),
      city_(layout),
      position_(spawn),
      clock_(t) {
  if (layout.block_at(spawn)) throw Error(ErrorCode::Validation, "players must spawn outside every block");
  kb_->load_static(layout.static_facts());
  kb_->add_user(uid);
  kb_->subscribe([this](const kb::Derivation& d) {
    if (pending_ && d.fact.template_name == "H_AbnormalBehaviour")
      pending_->actions.push_back(FlowAction{ActionKind::FlagAbnormal, 0, 0, {},
                                             lang::format_value(d.fact.values.at(1))});
  });
}

void PlayerSession::advance(std::int64_t t) {
  if (t < clock_)
    throw Error(ErrorCode::Validation, "session " + id_ + ": time " + std::to_string(t) + " is before " +
                                           std::to_string(clock_));
  clock_ = t;
}

void PlayerSession::emit(RecordKind kind, json payload) {
  if (sink_) sink_(kind, clock_, std::move(payload));
}

std::int64_t PlayerSession::enabled_siid(std::int64_t sid) const {
  const auto& st = city_.state(sid);
  return st.enabled_pid ? layout_->block(sid).siid_for(*st.enabled_pid) : 0;
}

void PlayerSession::after_event() {
  if (options_.compact_every == 0 || ++events_since_compact_ < options_.compact_every) return;
  events_since_compact_ = 0;
  kb_->compact(clock_);
}

Outcome PlayerSession::step_movement(const Vec3& p, std::int64_t t) {
  if (phase_ == Phase::Done) throw Error(ErrorCode::WrongPhase, "session " + id_ + " is over");
  Outcome out;
  Capture capture(pending_, out);
  advance(t);
  if (phase_ != Phase::Roaming) {
    out.warnings.push_back("movement ignored while " + std::string(to_string(phase_)));
    return out;
  }
  position_ = p;
  kb_->assert_event(kb::SalEvent::position(uid_, t, p.x, p.y, p.z));

  std::optional<std::int64_t> sid;
  bool inner = false;
  if (const auto* b = layout_->block_at(p)) {
    sid = b->sid;
    inner = city::zone_of(b->composite, p) == city::ZoneHit::Inner;
  }
  if (zone_inner_ && (sid != zone_sid_ || !inner)) {
    kb_->assert_event(kb::SalEvent::exit(uid_, t, *zone_sid_, kb::Zone::Inner, enabled_siid(*zone_sid_)));
    emit(RecordKind::ZoneExit, {{"sid", *zone_sid_}, {"zone", "inner"}});
  }
  if (zone_sid_ && sid != zone_sid_) {
    kb_->assert_event(kb::SalEvent::exit(uid_, t, *zone_sid_, kb::Zone::Outer, enabled_siid(*zone_sid_)));
    emit(RecordKind::ZoneExit, {{"sid", *zone_sid_}, {"zone", "outer"}});
  }
  bool was_inner = zone_inner_ && sid == zone_sid_;
  if (sid && sid != zone_sid_) {
    kb_->assert_event(kb::SalEvent::enter(uid_, t, *sid, kb::Zone::Outer));
    emit(RecordKind::ZoneEnter, {{"sid", *sid}, {"zone", "outer"}});
    if (city_.enable_default(*sid)) {
      out.actions.push_back(FlowAction{ActionKind::EnableDefaultInstance, *sid, 0, {}, {}});
      emit(RecordKind::Transform, {{"sid", *sid}, {"pid", layout_->default_pid()}, {"default", true}});
    }
  }
  zone_sid_ = sid;
  zone_inner_ = inner;
  if (inner && !was_inner) {
    kb_->assert_event(kb::SalEvent::enter(uid_, t, *sid, kb::Zone::Inner));
    emit(RecordKind::ZoneEnter, {{"sid", *sid}, {"zone", "inner"}});
    if (auto did = layout_->block(*sid).did) {
      return_pose_ = p;
      phase_ = Phase::InDilemma;
      current_did_ = *did;
      position_ = layout_->dilemma(*did).location.centre;
      out.actions.push_back(FlowAction{ActionKind::TransportToDilemma, 0, *did, position_, {}});
      emit(RecordKind::DilemmaOpen, {{"did", *did}, {"sid", *sid}});
    }
  }
  after_event();
  return out;
}

Outcome PlayerSession::submit_choice(std::int64_t did, std::optional<std::int64_t> cid, std::int64_t t) {
  if (phase_ != Phase::InDilemma || current_did_ != did)
    throw Error(ErrorCode::WrongPhase, "session " + id_ + " is not in dilemma " + std::to_string(did));
  if (!cid) throw Error(ErrorCode::Validation, "select a choice before continuing");
  const city::Dilemma& d = layout_->dilemma(did);
  const auto* choice = d.choice(*cid);
  if (!choice)
    throw Error(ErrorCode::InvalidChoice,
                "choice " + std::to_string(*cid) + " does not belong to dilemma " + std::to_string(did));
  Outcome out;
  Capture capture(pending_, out);
  advance(t);
  kb_->assert_event(kb::SalEvent::choice(uid_, t, did, *cid));
  if (auto pid = city_.apply_choice(d.sid, *cid)) {
    kb_->record_transformation(d.sid, *pid, t);
    Transform tr{d.sid, *pid, layout_->block(d.sid).siid_for(*pid)};
    out.transforms.push_back(tr);
    emit(RecordKind::Transform, {{"sid", tr.sid}, {"pid", tr.pid}, {"siid", tr.siid}});
  }
  answered_.insert(did);
  current_did_.reset();
  phase_ = Phase::Roaming;
  position_ = *return_pose_;
  out.actions.push_back(FlowAction{ActionKind::TransportBack, 0, 0, position_, {}});
  if (answered_.size() == layout_->dilemmas().size()) {
    // Leaving for the view from above ends the visit in progress.
    if (zone_inner_) {
      kb_->assert_event(kb::SalEvent::exit(uid_, t, *zone_sid_, kb::Zone::Inner, enabled_siid(*zone_sid_)));
      emit(RecordKind::ZoneExit, {{"sid", *zone_sid_}, {"zone", "inner"}});
    }
    if (zone_sid_) {
      kb_->assert_event(kb::SalEvent::exit(uid_, t, *zone_sid_, kb::Zone::Outer, enabled_siid(*zone_sid_)));
      emit(RecordKind::ZoneExit, {{"sid", *zone_sid_}, {"zone", "outer"}});
    }
    zone_sid_.reset();
    zone_inner_ = false;
    phase_ = Phase::Voting;
    position_ = view_from_above(*layout_);
    out.actions.push_back(FlowAction{ActionKind::TransportToViewFromAbove, 0, 0, position_, {}});
    out.actions.push_back(FlowAction{ActionKind::OpenVote, 0, 0, {}, {}});
  }
  after_event();
  return out;
}

Outcome PlayerSession::submit_vote(std::int64_t verdict, std::int64_t t) {
  if (phase_ != Phase::Voting) throw Error(ErrorCode::WrongPhase, "session " + id_ + " cannot vote now");
  if (verdict < 1 || verdict > 5) throw Error(ErrorCode::Validation, "verdict must lie in 1..5");
  Outcome out;
  Capture capture(pending_, out);
  advance(t);
  kb_->assert_event(kb::SalEvent::vote(uid_, t, verdict));
  verdict_ = verdict;
  phase_ = Phase::Done;
  return out;
}

Outcome PlayerSession::check_inactivity(std::int64_t now) {
  Outcome out;
  Capture capture(pending_, out);
  kb_->check_inactivity(now);
  return out;
}

IntentClassification PlayerSession::classify_intent(std::int64_t sid) const {
  const auto& block = layout_->block(sid);
  auto visits = kb_->query("H_UserInLocationHist", {{"uid", lang::Value{uid_}}, {"sid", lang::Value{sid}}});
  if (visits.empty())
    throw Error(ErrorCode::Validation,
                "player " + std::to_string(uid_) + " has no finished visit to block " + std::to_string(sid));
  IntentClassification c{uid_, sid, Intent::PassesBy, 0, false};
  for (const auto* f : visits)
    c.dwell = std::max(c.dwell, kb_->int_slot(*f, "end_time") - kb_->int_slot(*f, "start_time"));
  c.reached_inner = !kb_->query("H_UserInNestedLocationHist", {{"uid", lang::Value{uid_}},
                                                                {"rid", lang::Value{block.composite.inner().rid}}})
                         .empty();
  if (c.reached_inner || c.dwell >= options_.visit_dwell) c.intent = Intent::Visits;
  return c;
}

}  // namespace epolis::session
