#include <algorithm>

#include "epolis/analytics/analytics.hpp"
#include "epolis/error.hpp"
#include "epolis/kb/knowledge_base.hpp"
#include "epolis/lang/schema.hpp"

namespace epolis::analytics {

namespace {

lang::FactLiteral answered(const Answer& a) {
  static const lang::Schema schema = lang::Schema::builtin();
  const auto& t = schema.at("H_UserAnsweredDilemma");
  lang::FactLiteral f{t.name, {}};
  for (const auto& s : t.slots) f.values.push_back(lang::default_value(s.kind));
  f.values[*t.slot_index("uid")] = a.uid;
  f.values[*t.slot_index("did")] = a.did;
  f.values[*t.slot_index("choice")] = a.cid;
  f.values[*t.slot_index("start_time")] = a.time;
  return f;
}

// Per-did doctrine counts, counted by the knowledge base's prevailing rules.
std::map<std::int64_t, std::map<std::int64_t, std::int64_t>> counts_by_did(const Dataset& data) {
  auto latest = data.latest_answers();
  std::map<std::int64_t, std::int64_t> pid_of;
  kb::KnowledgeBase kb;
  for (const auto& a : latest) {
    pid_of[a.cid] = a.pid;
    kb.assert_fact(answered(a));
  }
  std::map<std::int64_t, std::map<std::int64_t, std::int64_t>> out;
  for (const auto& a : latest)
    if (!out.count(a.did))
      for (const auto& [cid, n] : kb.choice_counts(a.did)) out[a.did][pid_of.at(cid)] += n;
  return out;
}

Prevailing pick(std::map<std::int64_t, std::int64_t> counts) {
  Prevailing p;
  std::int64_t best = -1;
  for (const auto& [pid, n] : counts) {
    if (n > best) {
      best = n;
      p.pid = pid;
      p.tie = false;
    } else if (n == best) {
      p.tie = true;
    }
  }
  p.counts = std::move(counts);
  return p;
}

}  // namespace

Prevailing prevailing_doctrine(const Dataset& data, std::int64_t did) {
  auto all = counts_by_did(data);
  auto it = all.find(did);
  if (it == all.end()) throw Error(ErrorCode::Validation, "no answers for dilemma " + std::to_string(did));
  return pick(it->second);
}

Prevailing prevailing_doctrine(const Dataset& data) {
  auto all = counts_by_did(data);
  if (all.empty()) throw Error(ErrorCode::Validation, "no answers");
  std::map<std::int64_t, std::int64_t> total;
  for (const auto& [did, counts] : all)
    for (const auto& [pid, n] : counts) total[pid] += n;
  return pick(total);
}

ChoiceVector choice_vector(const Dataset& data, std::int64_t uid) {
  ChoiceVector v{uid, std::vector<double>(data.doctrines.size(), 0.0)};
  int n = 0;
  for (const auto& a : data.latest_answers()) {
    if (a.uid != uid) continue;
    auto it = std::find_if(data.doctrines.begin(), data.doctrines.end(), [&](const auto& d) { return d.pid == a.pid; });
    if (it == data.doctrines.end()) throw Error(ErrorCode::UnknownId, "unknown doctrine " + std::to_string(a.pid));
    v.freq[it - data.doctrines.begin()] += 1;
    ++n;
  }
  if (n)
    for (double& f : v.freq) f /= n;
  return v;
}

Position predominant_position(const Dataset& data, std::int64_t uid) {
  std::map<std::int64_t, std::int64_t> counts;
  for (const auto& a : data.latest_answers())
    if (a.uid == uid) counts[a.pid]++;
  if (counts.empty()) throw Error(ErrorCode::Validation, "player " + std::to_string(uid) + " has no answers");
  auto p = pick(counts);
  return {p.pid, p.tie};
}

bool divergence(const Dataset& data, std::int64_t uid, std::int64_t did) {
  auto predominant = predominant_position(data, uid).pid;
  for (const auto& a : data.latest_answers())
    if (a.uid == uid && a.did == did) return a.pid != predominant;
  throw Error(ErrorCode::Validation,
              "player " + std::to_string(uid) + " has not answered dilemma " + std::to_string(did));
}

Popularity sst_popularity(const Dataset& data, std::int64_t sid, std::int64_t visit_dwell) {
  Popularity p;
  for (const auto& v : data.visits) {
    if (v.sid != sid) continue;
    auto& [visits, dwell] = p.per_user[v.uid];
    std::int64_t d = v.end - v.start;
    bool visit = v.reached_inner || d >= visit_dwell;
    visits += visit;
    dwell += d;
    p.visits += visit;
    p.dwell += d;
  }
  return p;
}

std::map<std::int64_t, Vector> choice_vectors(const Dataset& data) {
  std::map<std::int64_t, Vector> out;
  for (auto uid : data.users()) out[uid] = choice_vector(data, uid).freq;
  return out;
}

}  // namespace epolis::analytics
