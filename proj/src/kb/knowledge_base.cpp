#include "epolis/kb/knowledge_base.hpp"

#include <algorithm>

#include "epolis/error.hpp"
#include "epolis/kb/programs.hpp"
#include "epolis/lang/parser.hpp"

namespace epolis::kb {

using lang::FactLiteral;
using lang::Value;
using rete::Fact;
using rete::FactId;
using rete::SlotUpdates;

namespace {

constexpr std::size_t kFiringLimit = 1'000'000;
const char* kNativeQuery = "kb";

Value i(std::int64_t v) { return Value{v}; }

}  // namespace

Layer layer_of(const std::string& name) {
  if (name.rfind("P_", 0) == 0 || name.rfind("L_", 0) == 0) return Layer::Sensor;
  if (name.size() > 4 && name.compare(name.size() - 4, 4, "Hist") == 0) return Layer::Historical;
  return Layer::Deductive;
}

std::string_view to_string(Zone z) { return z == Zone::Outer ? "outer" : "inner"; }

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Position: return "position";
    case EventKind::Enter: return "enter";
    case EventKind::Exit: return "exit";
    case EventKind::Choice: return "choice";
    case EventKind::Vote: return "vote";
  }
  return "?";
}

SalEvent SalEvent::position(std::int64_t uid, std::int64_t t, double x, double y, double z) {
  SalEvent e;
  e.kind = EventKind::Position;
  e.uid = uid;
  e.time = t;
  e.x = x;
  e.y = y;
  e.z = z;
  return e;
}

SalEvent SalEvent::enter(std::int64_t uid, std::int64_t t, std::int64_t sid, Zone zone) {
  SalEvent e;
  e.kind = EventKind::Enter;
  e.uid = uid;
  e.time = t;
  e.sid = sid;
  e.zone = zone;
  return e;
}

SalEvent SalEvent::exit(std::int64_t uid, std::int64_t t, std::int64_t sid, Zone zone,
                        std::int64_t siid) {
  SalEvent e = enter(uid, t, sid, zone);
  e.kind = EventKind::Exit;
  e.siid = siid;
  return e;
}

SalEvent SalEvent::choice(std::int64_t uid, std::int64_t t, std::int64_t did, std::int64_t cid) {
  SalEvent e;
  e.kind = EventKind::Choice;
  e.uid = uid;
  e.time = t;
  e.did = did;
  e.cid = cid;
  return e;
}

SalEvent SalEvent::vote(std::int64_t uid, std::int64_t t, std::int64_t verdict) {
  SalEvent e;
  e.kind = EventKind::Vote;
  e.uid = uid;
  e.time = t;
  e.verdict = verdict;
  return e;
}

CompactionPolicy CompactionPolicy::standard() {
  CompactionPolicy p;
  p.templates["P_PlayerPosition"] = Retention{{"uid"}, 1, std::nullopt};
  for (const char* t : {"L_BoundaryCollision", "L_ChoiceEvent", "L_VoteEvent"})
    p.templates[t] = Retention{{}, std::nullopt, 600'000};
  return p;
}

// ------------------------------------------------------------------ set-up --

KnowledgeBase::KnowledgeBase(KbOptions options) : options_(std::move(options)) {
  engine_.add_listener(this);
  if (options_.builtin_program) {
    for (const auto& p : builtin_programs())
      register_recurring_query(RecurringQuery{p.name, lang::parse_rules(p.source, engine_.schema()), {}});
  }
}

KnowledgeBase::~KnowledgeBase() { engine_.remove_listener(this); }

void KnowledgeBase::load_static(const std::vector<FactLiteral>& facts) {
  for (const auto& f : facts) {
    if (layer_of(f.template_name) != Layer::Sensor)
      throw Error(ErrorCode::Validation, "static fact outside the sensor layer: " + f.template_name);
    FactId id = engine_.assert_fact(f);
    const Fact& fact = *engine_.fact(id);
    if (f.template_name == "L_SpatialType") sids_.insert(int_slot(fact, "sid"));
    if (f.template_name == "L_Dilemma") {
      dids_.insert(int_slot(fact, "did"));
      dilemma_sid_[int_slot(fact, "did")] = int_slot(fact, "sid");
    }
    if (f.template_name == "L_NestedLocation") nested_rid_[int_slot(fact, "sid")] = int_slot(fact, "nrid");
  }
  settle();
  deliver();
}

void KnowledgeBase::add_user(std::int64_t uid) {
  if (uid <= 0) throw Error(ErrorCode::Validation, "uid must be positive");
  users_.insert(uid);
}

void KnowledgeBase::register_recurring_query(RecurringQuery q) {
  if (q.name.empty() || q.name == kNativeQuery || queries_.count(q.name))
    throw Error(ErrorCode::Validation, "query name in use: " + q.name);
  for (const auto& r : q.rules) {
    std::map<std::string, std::string> fact_templates;
    for (const auto& c : r.lhs)
      if (const auto* p = std::get_if<lang::Pattern>(&c); p && p->fact_var)
        fact_templates[*p->fact_var] = p->template_name;
    for (const auto& a : r.rhs) {
      std::string target;
      if (const auto* as = std::get_if<lang::AssertAction>(&a)) target = as->template_name;
      if (const auto* m = std::get_if<lang::ModifyAction>(&a)) target = fact_templates[m->fact_var];
      if (!target.empty() && layer_of(target) == Layer::Sensor)
        throw Error(ErrorCode::Validation,
                    "rule " + r.name + " writes sensor-layer template " + target);
    }
    if (engine_.has_rule(r.name) || rule_query_.count(r.name))
      throw Error(ErrorCode::Validation, "duplicate rule name: " + r.name);
  }
  for (const auto& r : q.rules) {
    engine_.add_rule(r);
    rule_query_[r.name] = q.name;
  }
  std::string name = q.name;
  queries_.emplace(name, std::move(q));
  settle();
  deliver();
}

bool KnowledgeBase::has_query(const std::string& name) const { return queries_.count(name) != 0; }

std::vector<std::string> KnowledgeBase::query_names() const {
  std::vector<std::string> out;
  for (const auto& [name, q] : queries_) out.push_back(name);
  return out;
}

// -------------------------------------------------------------- listeners --

std::optional<std::string> KnowledgeBase::flag_key(const Fact& f) const {
  const std::string& t = engine_.schema().at(f.template_index).name;
  auto s = [&](const char* slot) { return lang::format_value(engine_.slot(f, slot)); };
  if (t == "H_UserAnsweredDilemma") return "dilemma." + s("did") + ".answered." + s("uid");
  if (t == "H_UserInDilemma") return "dilemma." + s("did") + ".open." + s("uid");
  if (t == "H_PrevailingChoice") return "dilemma." + s("did") + ".prevailing." + s("choice");
  if (t == "H_UserAtSmartSpatialType") return "block." + s("sid") + ".present." + s("uid");
  if (t == "H_SmartSpatialTypeTransformed") return "block." + s("sid") + ".transformed";
  if (t == "H_UserVoted") return "vote." + s("uid") + ".cast";
  if (t == "H_AbnormalBehaviour") return "abnormal." + s("uid") + "." + s("kind");
  return std::nullopt;
}

void KnowledgeBase::on_assert(const Fact& f, const std::string& rule) {
  if (auto key = flag_key(f)) {
    ++flag_support_[*key];
    touched_flags_.insert(*key);
  }
  std::string query;
  if (!rule.empty()) {
    auto it = rule_query_.find(rule);
    if (it != rule_query_.end()) query = it->second;
  } else if (native_) query = kNativeQuery;
  else return;
  pending_.push_back(Derivation{query, rule, f.id, literal(f), clock_});
}

void KnowledgeBase::on_retract(const Fact& f, const std::string&) {
  if (auto key = flag_key(f)) {
    --flag_support_[*key];
    touched_flags_.insert(*key);
  }
}

void KnowledgeBase::settle() {
  auto r = engine_.run(kFiringLimit);
  for (auto& e : r.errors) rule_errors_.push_back(std::move(e));
  if (r.limit_hit) rule_errors_.push_back({"", "firing limit reached"});
}

void KnowledgeBase::deliver() {
  std::vector<Derivation> batch;
  batch.swap(pending_);
  for (const auto& d : batch) {
    if (auto it = queries_.find(d.query); it != queries_.end())
      for (const auto& cb : it->second.callbacks) cb(d);
    for (const auto& cb : subscribers_) cb(d);
  }
  std::map<std::string, bool> changed;
  for (const auto& key : touched_flags_) {
    bool now = flag_support_[key] > 0;
    auto it = flags_.find(key);
    if (it == flags_.end() ? now : it->second != now) {
      flags_[key] = now;
      changed[key] = now;
    }
  }
  touched_flags_.clear();
  if (!changed.empty())
    for (const auto& w : flag_watchers_) w(changed);
}

FactId KnowledgeBase::assert_native(const std::string& template_name, SlotUpdates slots) {
  native_ = true;
  FactId id;
  try {
    id = engine_.assert_slots(template_name, slots);
  } catch (...) {
    native_ = false;
    throw;
  }
  native_ = false;
  return id;
}

// ----------------------------------------------------------------- events --

void KnowledgeBase::check_event(const SalEvent& e) const {
  if (!users_.count(e.uid)) throw Error(ErrorCode::UnknownId, "unknown uid " + std::to_string(e.uid));
  if (e.time < 0) throw Error(ErrorCode::Validation, "negative event time");
  if (auto it = user_clock_.find(e.uid); it != user_clock_.end() && e.time < it->second)
    throw Error(ErrorCode::Validation, "event time " + std::to_string(e.time) +
                                           " precedes the previous event of uid " +
                                           std::to_string(e.uid));
  switch (e.kind) {
    case EventKind::Enter:
    case EventKind::Exit:
      if (!sids_.count(e.sid)) throw Error(ErrorCode::UnknownId, "unknown sid " + std::to_string(e.sid));
      break;
    case EventKind::Choice:
      if (!dids_.count(e.did)) throw Error(ErrorCode::UnknownId, "unknown did " + std::to_string(e.did));
      if (e.cid <= 0) throw Error(ErrorCode::Validation, "cid must be positive");
      break;
    case EventKind::Vote:
      if (e.verdict < 1 || e.verdict > 5) throw Error(ErrorCode::Validation, "verdict outside 1..5");
      break;
    case EventKind::Position:
      break;
  }
}

FactId KnowledgeBase::assert_event(const SalEvent& e) {
  check_event(e);
  ++seq_;
  clock_ = std::max(clock_, e.time);
  user_clock_[e.uid] = e.time;
  inactive_flagged_.erase(e.uid);

  FactId id = 0;
  switch (e.kind) {
    case EventKind::Position:
      id = engine_.assert_fact("P_PlayerPosition", {i(e.uid), e.x, e.y, e.z});
      break;
    case EventKind::Enter:
    case EventKind::Exit:
      id = engine_.assert_fact("L_BoundaryCollision",
                               {i(e.uid), i(e.sid), lang::sym(std::string(to_string(e.zone))),
                                lang::sym(std::string(to_string(e.kind))), i(seq_), i(e.time)});
      break;
    case EventKind::Choice:
      id = engine_.assert_fact("L_ChoiceEvent", {i(e.uid), i(e.did), i(e.cid),
                                                 i(dilemma_sid_.at(e.did)), i(seq_), i(e.time)});
      break;
    case EventKind::Vote:
      id = engine_.assert_fact("L_VoteEvent", {i(e.uid), i(e.verdict), i(seq_), i(e.time)});
      break;
  }
  detect(e);
  settle();
  if (e.kind == EventKind::Exit && e.zone == Zone::Outer) {
    close(IntervalKind::Location, e.uid, e.sid, e.time, e.siid, true);
  } else if (e.kind == EventKind::Exit) {
    auto rid = nested_rid_.find(e.sid);
    if (rid != nested_rid_.end()) close(IntervalKind::Nested, e.uid, rid->second, e.time, 0, true);
  } else if (e.kind == EventKind::Choice) {
    close(IntervalKind::Dilemma, e.uid, e.did, e.time, 0, false);
  }
  deliver();
  return id;
}

FactId KnowledgeBase::assert_fact(const FactLiteral& f) {
  FactId id = engine_.assert_fact(f);
  settle();
  deliver();
  return id;
}

void KnowledgeBase::retract_fact(FactId id) {
  engine_.retract(id);
  settle();
  deliver();
}

// -------------------------------------------------------------- intervals --

std::int64_t KnowledgeBase::resolve_siid(std::int64_t sid) const {
  const Fact* latest = nullptr;
  for (const Fact* f : query("H_SmartSpatialTypeTransformed", {{"sid", i(sid)}}))
    if (!latest || int_slot(*f, "start_time") >= int_slot(*latest, "start_time")) latest = f;
  if (!latest) return 0;
  auto inst = query("L_PoliticisedSpatialType", {{"sid", i(sid)}, {"pid", engine_.slot(*latest, "pid")}});
  return inst.empty() ? 0 : int_slot(*inst.front(), "siid");
}

std::optional<FactId> KnowledgeBase::close_interval(IntervalKind kind, std::int64_t uid,
                                                    std::int64_t key, std::int64_t end_time,
                                                    std::int64_t siid) {
  auto id = close(kind, uid, key, end_time, siid, true);
  deliver();
  return id;
}

std::optional<FactId> KnowledgeBase::close(IntervalKind kind, std::int64_t uid, std::int64_t key,
                                           std::int64_t end_time, std::int64_t siid,
                                           bool report_missing) {
  const char* open_t = nullptr;
  const char* key_slot = nullptr;
  switch (kind) {
    case IntervalKind::Location: open_t = "H_UserAtSmartSpatialType"; key_slot = "sid"; break;
    case IntervalKind::Nested: open_t = "H_UserAtNestedLocation"; key_slot = "rid"; break;
    case IntervalKind::Dilemma: open_t = "H_UserInDilemma"; key_slot = "did"; break;
  }
  auto open = query(open_t, {{"uid", i(uid)}, {key_slot, i(key)}});
  if (open.empty()) {
    if (report_missing)
      anomalies_.push_back(std::string(open_t) + " not open for uid " + std::to_string(uid) + " " +
                           key_slot + " " + std::to_string(key) + " at " + std::to_string(end_time));
    return std::nullopt;
  }
  // Overlapping opens (a repeated enter) collapse into one interval from the earliest start.
  std::int64_t start = int_slot(*open.front(), "start_time");
  for (const Fact* f : open) start = std::min(start, int_slot(*f, "start_time"));
  if (end_time < start)
    throw Error(ErrorCode::Validation, "interval ends at " + std::to_string(end_time) +
                                           " before it starts at " + std::to_string(start));
  std::vector<FactId> ids;
  for (const Fact* f : open) ids.push_back(f->id);
  for (FactId id : ids) engine_.retract(id);

  FactId hist = 0;
  switch (kind) {
    case IntervalKind::Location:
      hist = assert_native("H_UserInLocationHist",
                           {{"uid", i(uid)}, {"siid", i(siid ? siid : resolve_siid(key))},
                            {"sid", i(key)}, {"start_time", i(start)}, {"end_time", i(end_time)}});
      break;
    case IntervalKind::Nested:
      hist = assert_native("H_UserInNestedLocationHist", {{"uid", i(uid)}, {"rid", i(key)},
                                                          {"start_time", i(start)}, {"end_time", i(end_time)}});
      break;
    case IntervalKind::Dilemma:
      hist = assert_native("H_UserInDilemmaHist", {{"uid", i(uid)}, {"did", i(key)},
                                                   {"start_time", i(start)}, {"end_time", i(end_time)}});
      break;
  }
  settle();
  return hist;
}

FactId KnowledgeBase::record_transformation(std::int64_t sid, std::int64_t pid, std::int64_t time) {
  if (!sids_.count(sid)) throw Error(ErrorCode::UnknownId, "unknown sid " + std::to_string(sid));
  clock_ = std::max(clock_, time);
  FactId id = assert_native("H_SmartSpatialTypeTransformed",
                            {{"sid", i(sid)}, {"pid", i(pid)}, {"start_time", i(time)}});
  settle();
  deliver();
  return id;
}

// -------------------------------------------------------- abnormal behaviour --

void KnowledgeBase::flag(std::int64_t uid, const std::string& kind, std::int64_t time) {
  assert_native("H_AbnormalBehaviour", {{"uid", i(uid)}, {"kind", lang::sym(kind)}, {"start_time", i(time)}});
}

void KnowledgeBase::detect(const SalEvent& e) {
  const Thresholds& th = options_.thresholds;
  if (e.kind == EventKind::Position) {
    Motion& m = motion_[e.uid];
    if (m.has_pos) {
      double dx = e.x - m.x, dy = e.y - m.y, dz = e.z - m.z;
      if (dx != 0 || dy != 0 || dz != 0) {
        if (m.has_dir && dx * m.dx + dy * m.dy + dz * m.dz < 0) {
          m.reversals.push_back(e.time);
          while (m.reversals.front() < e.time - th.reversal_window) m.reversals.pop_front();
          if (m.reversals.size() >= th.reversal_count) {
            flag(e.uid, "erratic-movement", e.time);
            m.reversals.clear();
          }
        }
        m.dx = dx;
        m.dy = dy;
        m.dz = dz;
        m.has_dir = true;
      }
    }
    m.x = e.x;
    m.y = e.y;
    m.z = e.z;
    m.has_pos = true;
  } else if (e.kind == EventKind::Enter && e.zone == Zone::Outer) {
    auto& times = entries_[{e.uid, e.sid}];
    times.push_back(e.time);
    while (times.front() < e.time - th.re_entry_window) times.pop_front();
    if (times.size() >= th.re_entry_count) {
      flag(e.uid, "re-entry", e.time);
      times.clear();
    }
  } else if (e.kind == EventKind::Choice) {
    if (++answers_[{e.uid, e.did}] == th.repeated_choice) flag(e.uid, "repeated-choice", e.time);
  }
}

void KnowledgeBase::check_inactivity(std::int64_t now) {
  for (const auto& [uid, last] : user_clock_) {
    if (now - last >= options_.thresholds.inactivity && !inactive_flagged_.count(uid)) {
      inactive_flagged_.insert(uid);
      flag(uid, "inactivity", now);
    }
  }
  settle();
  deliver();
}

// -------------------------------------------------------------- compaction --

std::size_t KnowledgeBase::compact(std::int64_t now) {
  std::vector<FactId> doomed;
  // Age-limited templates lose a common prefix of the event sequence, so no
  // surviving event ever loses a later event that a negation depends on.
  std::optional<std::int64_t> keep_from;
  std::vector<std::pair<std::int64_t, FactId>> aged;
  for (const auto& [name, r] : options_.compaction.templates) {
    if (!r.max_age) continue;
    const auto* td = engine_.schema().find(name);
    if (!td || !td->slot_index("seq") || !td->slot_index("time")) continue;
    for (const Fact* f : engine_.facts_of(name)) {
      std::int64_t seq = int_slot(*f, "seq");
      if (int_slot(*f, "time") >= now - *r.max_age) keep_from = std::min(keep_from.value_or(seq), seq);
      aged.emplace_back(seq, f->id);
    }
  }
  std::sort(aged.begin(), aged.end());
  for (const auto& [seq, id] : aged)
    if (!keep_from || seq < *keep_from) doomed.push_back(id);

  for (const auto& [name, r] : options_.compaction.templates) {
    if (!r.keep_last) continue;
    std::map<std::vector<Value>, std::vector<FactId>> groups;
    for (const Fact* f : engine_.facts_of(name)) {
      std::vector<Value> key;
      for (const auto& slot : r.key) key.push_back(engine_.slot(*f, slot));
      groups[key].push_back(f->id);
    }
    for (auto& [key, ids] : groups) {
      std::sort(ids.begin(), ids.end());
      if (ids.size() > *r.keep_last)
        doomed.insert(doomed.end(), ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(*r.keep_last));
    }
  }
  for (FactId id : doomed) engine_.retract(id);
  settle();
  deliver();
  return doomed.size();
}

// ---------------------------------------------------------------- queries --

std::vector<const Fact*> KnowledgeBase::query(const std::string& template_name,
                                              const SlotUpdates& equal) const {
  std::vector<const Fact*> out;
  for (const Fact* f : engine_.facts_of(template_name)) {
    bool ok = std::all_of(equal.begin(), equal.end(), [&](const auto& kv) {
      return lang::values_equal(engine_.slot(*f, kv.first), kv.second);
    });
    if (ok) out.push_back(f);
  }
  return out;
}

FactLiteral KnowledgeBase::literal(const Fact& f) const {
  return FactLiteral{engine_.schema().at(f.template_index).name, f.values};
}

std::int64_t KnowledgeBase::int_slot(const Fact& f, const std::string& slot) const {
  const Value& v = engine_.slot(f, slot);
  if (const auto* n = std::get_if<std::int64_t>(&v)) return *n;
  throw Error(ErrorCode::Validation, "slot " + slot + " is not an integer");
}

std::map<std::int64_t, std::int64_t> KnowledgeBase::choice_counts(std::int64_t did) const {
  std::map<std::int64_t, std::int64_t> out;
  for (const Fact* f : query("H_SameChoiceDifferentPlayer", {{"did", i(did)}}))
    if (std::int64_t n = int_slot(*f, "count"); n > 0) out[int_slot(*f, "choice")] += n;
  return out;
}

PrevailingChoice KnowledgeBase::prevailing_choice(std::int64_t did) const {
  auto facts = query("H_PrevailingChoice", {{"did", i(did)}});
  if (facts.empty()) throw Error(ErrorCode::Validation, "no answers for dilemma " + std::to_string(did));
  PrevailingChoice p;
  p.choice = int_slot(*facts.front(), "choice");
  p.start_time = int_slot(*facts.front(), "start_time");
  auto counts = choice_counts(did);
  p.count = counts[p.choice];
  for (const auto& [c, n] : counts)
    if (c != p.choice && n == p.count) p.tie = true;
  return p;
}

std::optional<std::int64_t> KnowledgeBase::prevailing_verdict() const {
  auto facts = query("H_PrevailingVerdict");
  if (facts.empty()) return std::nullopt;
  return int_slot(*facts.front(), "verdict");
}

std::map<std::string, bool> KnowledgeBase::export_flags(const std::string& prefix) const {
  std::map<std::string, bool> out;
  for (auto it = flags_.lower_bound(prefix); it != flags_.end() && it->first.rfind(prefix, 0) == 0; ++it)
    out.insert(*it);
  return out;
}

}  // namespace epolis::kb
