#include <algorithm>
#include <set>

#include "epolis/analytics/analytics.hpp"
#include "epolis/error.hpp"
#include "epolis/lang/schema.hpp"

namespace epolis::analytics {

using store::RecordKind;

bool operator==(const Dataset& a, const Dataset& b) {
  auto same_doctrines = std::equal(a.doctrines.begin(), a.doctrines.end(), b.doctrines.begin(), b.doctrines.end(),
                                   [](const auto& x, const auto& y) { return x.pid == y.pid && x.name == y.name; });
  return same_doctrines && a.answers == b.answers && a.visits == b.visits && a.votes == b.votes;
}

Dataset Dataset::from_log(const std::vector<store::EventRecord>& records, const city::CityLayout& layout) {
  Dataset d;
  d.doctrines = layout.doctrines();
  struct Stay {
    std::int64_t sid = 0, start = 0;
    bool inner = false;
  };
  std::map<std::string, std::int64_t> uid_of;
  std::map<std::string, std::optional<Stay>> open;
  auto uid = [&](const store::EventRecord& r) {
    auto it = uid_of.find(r.session);
    if (it == uid_of.end())
      throw Error(ErrorCode::Corrupt, "record " + std::to_string(r.seq) + " names unknown session " + r.session);
    return it->second;
  };
  for (const auto& r : records) {
    const auto& p = r.payload;
    switch (r.kind) {
      case RecordKind::SessionStart: uid_of[r.session] = p.at("uid").get<std::int64_t>(); break;
      case RecordKind::ZoneEnter:
        if (p.at("zone") == "outer")
          open[r.session] = Stay{p.at("sid").get<std::int64_t>(), r.logical, false};
        else if (auto& s = open[r.session])
          s->inner = true;
        break;
      case RecordKind::ZoneExit:
        if (p.at("zone") == "outer") {
          if (auto& s = open[r.session]) d.visits.push_back({r.session, uid(r), s->sid, s->start, r.logical, s->inner});
          open[r.session].reset();
        }
        break;
      case RecordKind::Choice: {
        auto did = p.at("did").get<std::int64_t>(), cid = p.at("cid").get<std::int64_t>();
        const auto* c = layout.dilemma(did).choice(cid);
        if (!c) throw Error(ErrorCode::Corrupt, "record " + std::to_string(r.seq) + ": choice " +
                                                    std::to_string(cid) + " is not part of dilemma " + std::to_string(did));
        d.answers.push_back({r.session, uid(r), did, cid, c->pid, r.logical});
        break;
      }
      case RecordKind::Vote:
        d.votes.push_back({r.session, uid(r), p.at("verdict").get<std::int64_t>(), r.logical});
        break;
      default: break;
    }
  }
  return d;
}

Dataset Dataset::from_facts(const std::vector<lang::FactLiteral>& facts, const std::vector<city::Doctrine>& doctrines) {
  static const lang::Schema schema = lang::Schema::builtin();
  auto slot = [](const lang::FactLiteral& f, std::string_view name) {
    auto i = schema.at(f.template_name).slot_index(name);
    if (!i || *i >= f.values.size() || !std::holds_alternative<std::int64_t>(f.values[*i]))
      throw Error(ErrorCode::Validation, f.template_name + " has no integer slot " + std::string(name));
    return std::get<std::int64_t>(f.values[*i]);
  };
  Dataset d;
  d.doctrines = doctrines;
  std::map<std::int64_t, std::int64_t> pid_of;
  struct Nested {
    std::int64_t uid, rid, start, end;
  };
  std::vector<Nested> nested;
  for (const auto& f : facts) {
    if (f.template_name == "L_PoliticisedUserChoice") pid_of[slot(f, "cid")] = slot(f, "pid");
    if (f.template_name == "H_UserInNestedLocationHist")
      nested.push_back({slot(f, "uid"), slot(f, "rid"), slot(f, "start_time"), slot(f, "end_time")});
  }
  for (const auto& f : facts) {
    const auto& t = f.template_name;
    if (t == "H_UserAnsweredDilemma") {
      auto cid = slot(f, "choice");
      auto it = pid_of.find(cid);
      if (it == pid_of.end()) throw Error(ErrorCode::Validation, "choice " + std::to_string(cid) + " has no doctrine");
      d.answers.push_back({"", slot(f, "uid"), slot(f, "did"), cid, it->second, slot(f, "start_time")});
    } else if (t == "H_UserInLocationHist") {
      Visit v{"", slot(f, "uid"), slot(f, "sid"), slot(f, "start_time"), slot(f, "end_time"), false};
      for (const auto& n : nested)
        v.reached_inner |= n.uid == v.uid && n.rid == 100 * v.sid + 2 && n.start >= v.start && n.end <= v.end;
      d.visits.push_back(v);
    } else if (t == "H_UserVoted") {
      d.votes.push_back({"", slot(f, "uid"), slot(f, "verdict"), slot(f, "start_time")});
    }
  }
  return d;
}

std::vector<Answer> Dataset::latest_answers() const {
  std::map<std::pair<std::int64_t, std::int64_t>, Answer> last;
  for (const auto& a : answers) {
    auto [it, fresh] = last.try_emplace({a.uid, a.did}, a);
    if (!fresh && a.time >= it->second.time) it->second = a;
  }
  std::vector<Answer> out;
  for (auto& [key, a] : last) out.push_back(a);
  return out;
}

std::vector<std::int64_t> Dataset::users() const {
  std::set<std::int64_t> u;
  for (const auto& a : answers) u.insert(a.uid);
  return {u.begin(), u.end()};
}

}  // namespace epolis::analytics
