#include "epolis/session/host.hpp"

#include "epolis/error.hpp"

namespace epolis::session {

using city::Vec3;
using nlohmann::json;
using store::RecordKind;

namespace {

json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 vec_from(const json& j) { return Vec3{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

std::map<std::string, std::string> as_prefs(const std::string& prefix, const std::map<std::string, bool>& flags) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : flags) out[prefix + k] = v ? "true" : "false";
  return out;
}

}  // namespace

json to_json(const SessionSnapshot& s) {
  json blocks = json::object();
  for (const auto& [sid, b] : s.blocks) {
    const char* phase = b.phase == city::BlockPhase::Disabled         ? "disabled"
                        : b.phase == city::BlockPhase::DefaultEnabled ? "default"
                                                                      : "transformed";
    blocks[std::to_string(sid)] = {{"phase", phase}, {"pid", b.enabled_pid ? json(*b.enabled_pid) : json()}};
  }
  return {{"uid", s.uid},
          {"phase", std::string(to_string(s.phase))},
          {"position", vec(s.position)},
          {"return_pose", s.return_pose ? vec(*s.return_pose) : json()},
          {"answered", s.answered},
          {"verdict", s.verdict ? json(*s.verdict) : json()},
          {"blocks", blocks},
          {"flags", s.flags}};
}

json to_json(const HostState& s) {
  json sessions = json::object();
  for (const auto& [id, snap] : s.sessions) sessions[id] = to_json(snap);
  return {{"sessions", sessions}, {"city_flags", s.city_flags}};
}

SessionHost::SessionHost(const city::CityLayout& layout, SessionOptions options, store::EventLog* log,
                         store::PrefsStore* prefs)
    : layout_(&layout),
      options_(std::move(options)),
      log_(log),
      prefs_(prefs),
      aggregator_(std::make_unique<kb::KnowledgeBase>(options_.kb)) {
  aggregator_->load_static(layout.static_facts());
  if (prefs_) aggregator_->watch_flags([this](const auto& changed) { prefs_->set_many(as_prefs("city.", changed)); });
}

SessionHost::~SessionHost() = default;

PlayerSession& SessionHost::find(const std::string& id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownId, "unknown session " + id);
  return *it->second;
}

bool SessionHost::has_session(const std::string& id) const {
  std::lock_guard lock(mu_);
  return sessions_.count(id) != 0;
}

const PlayerSession& SessionHost::session(const std::string& id) const {
  std::lock_guard lock(mu_);
  return const_cast<SessionHost*>(this)->find(id);
}

std::vector<std::string> SessionHost::session_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

void SessionHost::log(const std::string& session, RecordKind kind, std::int64_t t, json payload) {
  if (!log_) return;
  store::EventRecord r;
  r.logical = t;
  r.session = session;
  r.kind = kind;
  r.payload = std::move(payload);
  log_->append(std::move(r));
}

// The command record goes first, then whatever the session derived from it.
void SessionHost::commit(const std::string& session, RecordKind kind, std::int64_t t, json payload) {
  auto derived = std::move(derived_);
  derived_.clear();
  log(session, kind, t, std::move(payload));
  for (auto& [k, lt, p] : derived) log(session, k, lt, std::move(p));
}

void SessionHost::push(const PushEvent& e) {
  for (const auto& [id, l] : listeners_) l(e);
}

void SessionHost::publish(const std::string& session, const Outcome& out) {
  for (const auto& a : out.actions) push({session, "flow-action", to_json(a)});
  for (const auto& t : out.transforms)
    push({session, "transform", {{"sid", t.sid}, {"pid", t.pid}, {"siid", t.siid}}});
}

std::size_t SessionHost::subscribe(Listener l) {
  std::lock_guard lock(mu_);
  listeners_[next_listener_] = std::move(l);
  return next_listener_++;
}

void SessionHost::unsubscribe(std::size_t id) {
  std::lock_guard lock(mu_);
  listeners_.erase(id);
}

std::string SessionHost::start_session(std::int64_t uid, std::int64_t t, std::optional<Vec3> spawn) {
  std::lock_guard lock(mu_);
  Vec3 at = spawn.value_or(layout_->road_point(0, 0));
  std::string id = "s" + std::to_string(next_session_);
  auto s = std::make_unique<PlayerSession>(id, uid, *layout_, at, t, options_);
  ++next_session_;
  s->set_record_sink([this](RecordKind k, std::int64_t lt, json p) { derived_.emplace_back(k, lt, std::move(p)); });
  if (prefs_)
    s->watch_flags([this, id](const auto& changed) { prefs_->set_many(as_prefs(id + ".", changed)); });
  sessions_[id] = std::move(s);
  commit(id, RecordKind::SessionStart, t, {{"uid", uid}, {"spawn", vec(at)}});
  return id;
}

Outcome SessionHost::move(const std::string& id, const Vec3& p, std::int64_t t) {
  std::lock_guard lock(mu_);
  derived_.clear();
  Outcome out = find(id).step_movement(p, t);
  commit(id, RecordKind::Move, t, {{"position", vec(p)}});
  publish(id, out);
  return out;
}

Outcome SessionHost::choice(const std::string& id, std::int64_t did, std::optional<std::int64_t> cid,
                            std::int64_t t) {
  std::lock_guard lock(mu_);
  derived_.clear();
  PlayerSession& s = find(id);
  Outcome out = s.submit_choice(did, cid, t);
  commit(id, RecordKind::Choice, t, {{"did", did}, {"cid", *cid}});
  publish(id, out);
  aggregate_choice(s.uid(), did, *cid, t);
  return out;
}

Outcome SessionHost::vote(const std::string& id, std::int64_t verdict, std::int64_t t) {
  std::lock_guard lock(mu_);
  derived_.clear();
  PlayerSession& s = find(id);
  Outcome out = s.submit_vote(verdict, t);
  commit(id, RecordKind::Vote, t, {{"verdict", verdict}});
  publish(id, out);
  aggregate_vote(s.uid(), verdict, t);
  return out;
}

void SessionHost::tick(std::int64_t now) {
  std::lock_guard lock(mu_);
  derived_.clear();
  std::vector<std::pair<std::string, Outcome>> outcomes;
  for (auto& [id, s] : sessions_)
    if (s->phase() != Phase::Done) outcomes.emplace_back(id, s->check_inactivity(now));
  commit("", RecordKind::SimMarker, now, {{"marker", "tick"}});
  for (const auto& [id, out] : outcomes) publish(id, out);
}

// Sessions of one player may overlap, so the aggregator sees each player's
// events on a clock that never runs backwards.
std::int64_t SessionHost::aggregator_time(std::int64_t uid, std::int64_t t) {
  if (!aggregator_->has_user(uid)) aggregator_->add_user(uid);
  auto& c = aggregator_clock_[uid];
  c = std::max(c, t);
  return c;
}

void SessionHost::aggregate_choice(std::int64_t uid, std::int64_t did, std::int64_t cid, std::int64_t t) {
  aggregator_->assert_event(kb::SalEvent::choice(uid, aggregator_time(uid, t), did, cid));
  kb::PrevailingChoice p = aggregator_->prevailing_choice(did);
  auto it = prevailing_.find(did);
  if (it != prevailing_.end() && it->second == p.choice) return;
  prevailing_[did] = p.choice;
  const auto* c = layout_->dilemma(did).choice(p.choice);
  push({"", "prevailing-update",
        {{"did", did}, {"choice", p.choice}, {"count", p.count}, {"tie", p.tie}, {"pid", c ? c->pid : 0}}});
}

void SessionHost::aggregate_vote(std::int64_t uid, std::int64_t verdict, std::int64_t t) {
  aggregator_->assert_event(kb::SalEvent::vote(uid, aggregator_time(uid, t), verdict));
  auto v = aggregator_->prevailing_verdict();
  if (v == prevailing_verdict_) return;
  prevailing_verdict_ = v;
  push({"", "prevailing-update", {{"verdict", v ? json(*v) : json()}}});
}

void SessionHost::apply(const store::EventRecord& r) {
  const json& p = r.payload;
  try {
    switch (r.kind) {
      case RecordKind::SessionStart: {
        std::string id = start_session(p.at("uid").get<std::int64_t>(), r.logical, vec_from(p.at("spawn")));
        if (id != r.session)
          throw Error(ErrorCode::Corrupt, "record " + std::to_string(r.seq) + " starts " + r.session +
                                              " but the host assigned " + id);
        break;
      }
      case RecordKind::Move: move(r.session, vec_from(p.at("position")), r.logical); break;
      case RecordKind::Choice:
        choice(r.session, p.at("did").get<std::int64_t>(), p.at("cid").get<std::int64_t>(), r.logical);
        break;
      case RecordKind::Vote: vote(r.session, p.at("verdict").get<std::int64_t>(), r.logical); break;
      case RecordKind::SimMarker:
        if (p.value("marker", "") == "tick") tick(r.logical);
        break;
      default: break;  // derived records are recomputed
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Corrupt, "record " + std::to_string(r.seq) + ": " + e.what());
  }
}

void SessionHost::restore(const std::vector<store::EventRecord>& records, store::EventLog* log) {
  std::lock_guard lock(mu_);
  log_ = nullptr;
  for (const auto& r : records) apply(r);
  log_ = log;
}

HostState SessionHost::state() const {
  std::lock_guard lock(mu_);
  HostState out;
  for (const auto& [id, s] : sessions_) {
    SessionSnapshot snap;
    snap.uid = s->uid();
    snap.phase = s->phase();
    snap.position = s->position();
    snap.return_pose = s->return_pose();
    snap.answered = s->answered();
    snap.verdict = s->verdict();
    snap.blocks = s->city().states();
    snap.flags = s->kb().export_flags();
    out.sessions[id] = std::move(snap);
  }
  out.city_flags = aggregator_->export_flags();
  return out;
}

HostState replay(const std::vector<store::EventRecord>& records, const city::CityLayout& layout,
                 SessionOptions options, store::EventLog* relog) {
  SessionHost host(layout, std::move(options), relog);
  for (const auto& r : records) host.apply(r);
  return host.state();
}

}  // namespace epolis::session
