#include <algorithm>
#include <set>
#include <sstream>

#include "epolis/analytics/analytics.hpp"
#include "epolis/error.hpp"
#include "epolis/service/api.hpp"

namespace epolis::service {

using json = nlohmann::json;
using session::PlayerSession;

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string p; std::getline(ss, p, '/');)
    if (!p.empty()) parts.push_back(p);
  return parts;
}

std::int64_t id_from(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    auto v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::UnknownId, std::string("no ") + what + " '" + text + "'");
}

std::int64_t int_param(const std::map<std::string, std::string>& q, const std::string& key, std::int64_t fallback) {
  auto it = q.find(key);
  if (it == q.end()) return fallback;
  try {
    std::size_t used = 0;
    auto v = std::stoll(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::Validation, "query parameter " + key + " must be an integer");
}

json vec(const city::Vec3& v) { return {{"x", v.x}, {"y", v.y}, {"z", v.z}}; }

ApiResponse not_found(const ApiRequest& r) {
  return {404, {{"error", {{"code", "not-found"}, {"message", "no route for " + r.method + " " + r.path}}}}};
}

json prevailing_json(const analytics::Prevailing& p) {
  json counts = json::object();
  for (const auto& [pid, n] : p.counts) counts[std::to_string(pid)] = n;
  return {{"pid", p.pid}, {"counts", counts}, {"tie", p.tie}};
}

}  // namespace

ApiResponse error_response(const std::exception& e) {
  int status = 500;
  std::string code = "internal";
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->code()) {
      case ErrorCode::WrongPhase: status = 409, code = "wrong-phase"; break;
      case ErrorCode::UnknownId: status = 404, code = "unknown-id"; break;
      case ErrorCode::InvalidChoice: status = 422, code = "invalid-choice"; break;
      case ErrorCode::Validation:
      case ErrorCode::Syntax: status = 400, code = "validation"; break;
      default: break;
    }
  } else if (dynamic_cast<const json::exception*>(&e)) {
    status = 400, code = "validation";
  }
  return {status, {{"error", {{"code", code}, {"message", e.what()}}}}};
}

Api::Api(const city::CityLayout& layout, store::EventLog* log, store::PrefsStore* prefs, std::string layout_id)
    : layout_(&layout),
      layout_id_(std::move(layout_id)),
      own_log_(log ? nullptr : std::make_unique<store::EventLog>()),
      log_(log ? log : own_log_.get()),
      host_(layout, {}, nullptr, prefs),
      started_(std::chrono::steady_clock::now()) {
  auto records = log_->records();
  host_.restore(records, log_);
  for (const auto& r : records) clock_base_ = std::max(clock_base_, r.logical);
  for (const auto& id : host_.session_ids()) next_uid_ = std::max(next_uid_, host_.session(id).uid() + 1);
}

std::size_t Api::subscribe(const std::string& session, Listener l) {
  return host_.subscribe([session, l = std::move(l)](const session::PushEvent& e) {
    if (e.session.empty() || e.session == session) l(e);
  });
}

std::int64_t Api::time_for(const json& body, std::int64_t floor) {
  if (body.contains("t")) return body.at("t").get<std::int64_t>();
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started_).count();
  return std::max(floor, clock_base_ + static_cast<std::int64_t>(elapsed));
}

json Api::session_resource(const PlayerSession& s) const {
  json pending = nullptr;
  if (s.phase() == session::Phase::InDilemma && s.dilemma())
    pending = {{"action", "transport-to-dilemma"}, {"did", *s.dilemma()}};
  else if (s.phase() == session::Phase::Voting)
    pending = {{"action", "open-vote"}};
  return {{"session", s.id()},
          {"uid", s.uid()},
          {"phase", std::string(to_string(s.phase()))},
          {"position", vec(s.position())},
          {"answered", s.answered().size()},
          {"total", layout_->dilemmas().size()},
          {"dilemma", s.dilemma() ? json(*s.dilemma()) : json(nullptr)},
          {"verdict", s.verdict() ? json(*s.verdict()) : json(nullptr)},
          {"pending", pending}};
}

json Api::outcome_body(const session::Outcome& o) const {
  json actions = json::array(), transforms = json::array();
  for (const auto& a : o.actions) actions.push_back(to_json(a));
  for (const auto& t : o.transforms) transforms.push_back({{"sid", t.sid}, {"pid", t.pid}, {"siid", t.siid}});
  return {{"actions", actions}, {"transforms", transforms}, {"warnings", o.warnings}};
}

ApiResponse Api::handle(const ApiRequest& request) {
  try {
    auto parts = split_path(request.path);
    const std::string& m = request.method;
    if (parts.empty() || parts[0] != "api") return not_found(request);
    parts.erase(parts.begin());
    json body = request.body.empty() ? json::object() : json::parse(request.body);
    if (!body.is_object()) throw Error(ErrorCode::Validation, "request body must be a JSON object");
    std::lock_guard lock(host_.mutex());

    if (parts.size() == 1 && m == "GET") {
      if (parts[0] == "health") return {200, {{"status", "ok"}, {"version", EPOLIS_VERSION}}};
      if (parts[0] == "layouts") return {200, {{"layouts", {layout_id_}}}};
      if (parts[0] == "layout") return {200, json::parse(layout_->to_json())};
      if (parts[0] == "doctrines") {
        json out = json::array();
        for (const auto& d : layout_->doctrines()) out.push_back({{"pid", d.pid}, {"name", d.name}});
        return {200, out};
      }
      if (parts[0] == "sessions") {
        json out = json::array();
        for (const auto& id : host_.session_ids()) out.push_back(session_resource(host_.session(id)));
        return {200, out};
      }
    }
    if (parts.size() == 1 && parts[0] == "sessions" && m == "POST") {
      std::string layout = body.value("layout", layout_id_);
      if (layout != layout_id_) throw Error(ErrorCode::UnknownId, "no layout '" + layout + "'");
      std::int64_t uid = body.contains("uid") ? body.at("uid").get<std::int64_t>() : next_uid_;
      std::optional<city::Vec3> spawn;
      if (body.contains("spawn")) {
        const auto& s = body.at("spawn");
        spawn = city::Vec3{s.at("x").get<double>(), s.value("y", 0.0), s.at("z").get<double>()};
      }
      auto id = host_.start_session(uid, time_for(body, 0), spawn);
      next_uid_ = std::max(next_uid_, uid + 1);
      return {201, session_resource(host_.session(id))};
    }
    if (parts.size() >= 2 && parts[0] == "sessions") {
      const PlayerSession& s = host_.session(parts[1]);
      const std::string& id = parts[1];
      if (parts.size() == 2 && m == "GET") return {200, session_resource(s)};
      if (parts.size() == 3 && parts[2] == "city" && m == "GET") {
        json blocks = json::array();
        for (const auto& [sid, st] : s.city().states())
          blocks.push_back({{"sid", sid},
                            {"phase", st.phase == city::BlockPhase::Disabled         ? "disabled"
                                      : st.phase == city::BlockPhase::DefaultEnabled ? "default"
                                                                                     : "transformed"},
                            {"pid", st.enabled_pid ? json(*st.enabled_pid) : json(nullptr)}});
        return {200, {{"blocks", blocks}}};
      }
      if (parts.size() == 3 && parts[2] == "move" && m == "POST") {
        city::Vec3 p{body.at("x").get<double>(), body.value("y", 0.0), body.at("z").get<double>()};
        return {200, outcome_body(host_.move(id, p, time_for(body, s.clock())))};
      }
      if (parts.size() == 4 && parts[2] == "dilemmas" && m == "GET") {
        const auto& d = layout_->dilemma(id_from(parts[3], "dilemma"));
        json choices = json::array();
        for (const auto& c : d.choices) choices.push_back({{"cid", c.cid}, {"text", c.text}});
        return {200, {{"did", d.did}, {"sid", d.sid}, {"title", d.title}, {"body", d.body}, {"media", d.media},
                      {"choices", choices}, {"answered", s.answered().count(d.did) != 0}}};
      }
      if (parts.size() == 3 && parts[2] == "choice" && m == "POST") {
        auto did = body.at("did").get<std::int64_t>();
        std::optional<std::int64_t> cid;
        if (body.contains("cid") && !body.at("cid").is_null()) cid = body.at("cid").get<std::int64_t>();
        return {200, outcome_body(host_.choice(id, did, cid, time_for(body, s.clock())))};
      }
      if (parts.size() == 3 && parts[2] == "vote" && m == "POST") {
        auto out = host_.vote(id, body.at("verdict").get<std::int64_t>(), time_for(body, s.clock()));
        json r = outcome_body(out);
        r["ok"] = true;
        r["phase"] = std::string(to_string(host_.session(id).phase()));
        return {200, r};
      }
    }
    if (!parts.empty() && parts[0] == "analytics" && m == "GET")
      if (auto r = analytics(request, parts)) return *r;
    return not_found(request);
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

std::optional<ApiResponse> Api::analytics(const ApiRequest& request, const std::vector<std::string>& parts) {
  auto data = analytics::Dataset::from_log(log_->records(), *layout_);
  const auto& q = request.query;
  if (parts.size() == 2 && parts[1] == "prevailing") {
    if (q.count("did")) return ApiResponse{200, prevailing_json(analytics::prevailing_doctrine(data, int_param(q, "did", 0)))};
    json out{{"all", prevailing_json(analytics::prevailing_doctrine(data))}};
    std::set<std::int64_t> dids;
    for (const auto& a : data.answers) dids.insert(a.did);
    for (auto did : dids) out["dilemmas"][std::to_string(did)] = prevailing_json(analytics::prevailing_doctrine(data, did));
    return ApiResponse{200, out};
  }
  if (parts.size() == 3 && parts[1] == "position") {
    auto uid = id_from(parts[2], "player");
    auto p = analytics::predominant_position(data, uid);
    json divergent = json::array();
    for (const auto& a : data.latest_answers())
      if (a.uid == uid && analytics::divergence(data, uid, a.did)) divergent.push_back(a.did);
    return ApiResponse{200, {{"uid", uid}, {"pid", p.pid}, {"tie", p.tie}, {"vector", analytics::choice_vector(data, uid).freq},
                             {"divergent", divergent}}};
  }
  if (parts.size() == 3 && parts[1] == "popularity") {
    auto sid = id_from(parts[2], "block");
    layout_->block(sid);
    auto p = analytics::sst_popularity(data, sid, int_param(q, "visit_dwell", 10'000));
    json users = json::object();
    for (const auto& [uid, vd] : p.per_user) users[std::to_string(uid)] = {{"visits", vd.first}, {"dwell", vd.second}};
    return ApiResponse{200, {{"sid", sid}, {"visits", p.visits}, {"dwell", p.dwell}, {"users", users}}};
  }
  if (parts.size() == 2 && parts[1] == "clusters") {
    analytics::KMeansOptions o;
    o.seed = static_cast<std::uint64_t>(int_param(q, "seed", 1));
    auto r = analytics::opinion_groups(analytics::choice_vectors(data), static_cast<int>(int_param(q, "kmin", 2)),
                                       static_cast<int>(int_param(q, "kmax", 9)), o);
    json assignments = json::object(), table = json::array();
    for (const auto& [uid, c] : r.assignments) assignments[std::to_string(uid)] = c;
    for (const auto& row : r.table)
      table.push_back({{"k", row.k}, {"inertia", row.inertia},
                       {"silhouette", row.silhouette ? json(*row.silhouette) : json(nullptr)}});
    return ApiResponse{200, {{"k", r.k}, {"silhouette", r.silhouette ? json(*r.silhouette) : json(nullptr)},
                             {"degenerate", r.degenerate}, {"assignments", assignments}, {"centroids", r.centroids},
                             {"table", table}}};
  }
  if (parts.size() == 2 && parts[1] == "summary") {
    return ApiResponse{200, {{"answers", data.answers.size()}, {"players", data.users().size()},
                             {"visits", data.visits.size()}, {"votes", data.votes.size()}}};
  }
  return std::nullopt;
}

std::string format_sse(const session::PushEvent& e) {
  json data = e.data;
  std::string out = "event: " + e.type + "\n";
  json envelope{{"session", e.session}, {"type", e.type}, {"data", data}};
  out += "data: " + envelope.dump() + "\n\n";
  return out;
}

}  // namespace epolis::service
