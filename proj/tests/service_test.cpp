#include <gtest/gtest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

#include "epolis/analytics/analytics.hpp"
#include "epolis/error.hpp"
#include "epolis/service/api.hpp"
#include "support/players.hpp"

using namespace epolis;
using namespace epolis::service;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const city::CityLayout& default_city() {
  static const city::CityLayout city = city::CityLayout::generate(city::LayoutParams{});
  return city;
}

const city::CityLayout& mini_city() {
  static const city::CityLayout city = [] {
    city::LayoutParams p;
    p.rows = 2;
    p.cols = 3;
    p.dilemmas = 3;
    return city::CityLayout::generate(p);
  }();
  return city;
}

ApiResponse call(Api& api, const std::string& method, const std::string& path, const json& body = nullptr,
                 std::map<std::string, std::string> query = {}) {
  return api.handle({method, path, std::move(query), body.is_null() ? "" : body.dump()});
}

json at(const city::Vec3& p, std::int64_t t) { return {{"x", p.x}, {"y", p.y}, {"z", p.z}, {"t", t}}; }

std::string code_of(const ApiResponse& r) { return r.body["error"]["code"]; }

// One command of a scripted play-through, in the shape of both transports.
struct Command {
  std::string method, path;
  json body;
};

// Walks into every dilemma in did order, picks choice (did % 5), returns to
// the road and finally votes 4.
std::vector<Command> script(const city::CityLayout& city, const std::string& id) {
  std::vector<Command> out;
  std::int64_t t = 0;
  std::string base = "/api/sessions/" + id;
  for (const auto& d : city.dilemmas()) {
    auto a = oracle::approach(city, d.sid);
    out.push_back({"POST", base + "/move", at(a.road, t += 1000)});
    out.push_back({"POST", base + "/move", at(a.outer, t += 1000)});
    out.push_back({"POST", base + "/move", at(a.inner, t += 1000)});
    out.push_back({"POST", base + "/choice", {{"did", d.did}, {"cid", d.choices[d.did % 5].cid}, {"t", t += 1000}}});
    out.push_back({"POST", base + "/move", at(a.road, t += 1000)});
  }
  out.push_back({"POST", base + "/vote", {{"verdict", 4}, {"t", t += 1000}}});
  return out;
}

void run_direct(session::SessionHost& host, const std::string& id, const std::vector<Command>& cmds) {
  for (const auto& c : cmds) {
    const auto& b = c.body;
    if (c.path.ends_with("/move"))
      host.move(id, {b["x"], b["y"], b["z"]}, b["t"]);
    else if (c.path.ends_with("/choice"))
      host.choice(id, b["did"], b["cid"].get<std::int64_t>(), b["t"]);
    else
      host.vote(id, b["verdict"], b["t"]);
  }
}

}  // namespace

TEST(Api, SessionResourceMirrorsTheSession) {
  Api api(mini_city());
  auto r = call(api, "POST", "/api/sessions", {{"uid", 7}, {"t", 0}});
  ASSERT_EQ(r.status, 201);
  std::string id = r.body["session"];
  EXPECT_EQ(r.body["uid"], 7);
  EXPECT_EQ(r.body["phase"], "roaming");
  EXPECT_EQ(r.body["total"], 3);
  EXPECT_TRUE(r.body["pending"].is_null());

  const auto& d = mini_city().dilemmas().front();
  auto a = oracle::approach(mini_city(), d.sid);
  call(api, "POST", "/api/sessions/" + id + "/move", at(a.inner, 1000));
  auto s = call(api, "GET", "/api/sessions/" + id).body;
  const auto& live = api.host().session(id);
  EXPECT_EQ(s["phase"], std::string(to_string(live.phase())));
  EXPECT_EQ(s["position"]["x"], live.position().x);
  EXPECT_EQ(s["position"]["z"], live.position().z);
  EXPECT_EQ(s["dilemma"], d.did);
  EXPECT_EQ(s["pending"]["action"], "transport-to-dilemma");

  auto dil = call(api, "GET", "/api/sessions/" + id + "/dilemmas/" + std::to_string(d.did));
  ASSERT_EQ(dil.status, 200);
  EXPECT_EQ(dil.body["choices"].size(), 5u);
  EXPECT_EQ(dil.body["title"], d.title);
}

TEST(Api, ForeignChoiceLeavesTheSessionUnchanged) {
  Api api(mini_city());
  std::string id = call(api, "POST", "/api/sessions", {{"t", 0}}).body["session"];
  const auto& d = mini_city().dilemmas()[0];
  call(api, "POST", "/api/sessions/" + id + "/move", at(oracle::approach(mini_city(), d.sid).inner, 1000));
  auto before = api.host().state();
  auto log_size = call(api, "GET", "/api/analytics/summary").body;
  auto r = call(api, "POST", "/api/sessions/" + id + "/choice",
                {{"did", d.did}, {"cid", mini_city().dilemmas()[1].choices[0].cid}, {"t", 2000}});
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(code_of(r), "invalid-choice");
  EXPECT_EQ(api.host().state(), before);
  EXPECT_EQ(call(api, "GET", "/api/analytics/summary").body, log_size);
}

TEST(Api, ErrorsCarryMachineReadableCodes) {
  Api api(mini_city());
  std::string id = call(api, "POST", "/api/sessions", {{"t", 0}}).body["session"];
  auto r = call(api, "POST", "/api/sessions/" + id + "/vote", {{"verdict", 3}, {"t", 10}});
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(code_of(r), "wrong-phase");
  r = call(api, "GET", "/api/sessions/s99");
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(code_of(r), "unknown-id");
  r = call(api, "GET", "/api/sessions/" + id + "/dilemmas/999");
  EXPECT_EQ(code_of(r), "unknown-id");
  r = api.handle({"POST", "/api/sessions/" + id + "/move", {}, "{not json"});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(code_of(r), "validation");
  r = call(api, "POST", "/api/sessions/" + id + "/move", {{"x", 1}});
  EXPECT_EQ(code_of(r), "validation");
  r = call(api, "POST", "/api/sessions", {{"layout", "elsewhere"}});
  EXPECT_EQ(code_of(r), "unknown-id");
  r = call(api, "GET", "/api/nothing");
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(code_of(r), "not-found");
  r = call(api, "GET", "/api/analytics/prevailing");
  EXPECT_EQ(code_of(r), "validation");
}

TEST(Api, PushArrivesBeforeTheMoveReturns) {
  Api api(mini_city());
  std::string id = call(api, "POST", "/api/sessions", {{"t", 0}}).body["session"];
  std::vector<json> seen;
  api.subscribe(id, [&](const session::PushEvent& e) { seen.push_back(e.data); });
  const auto& d = mini_city().dilemmas()[0];
  auto r = call(api, "POST", "/api/sessions/" + id + "/move", at(oracle::approach(mini_city(), d.sid).inner, 1000));
  ASSERT_EQ(r.status, 200);
  bool transported = false;
  for (const auto& e : seen) transported |= e.value("action", "") == "transport-to-dilemma";
  EXPECT_TRUE(transported);
}

TEST(Api, ScriptedSessionMatchesTheDirectRun) {
  const auto& city = default_city();
  ASSERT_EQ(city.dilemmas().size(), 20u);
  Api api(city);
  std::string id = call(api, "POST", "/api/sessions", {{"uid", 1}, {"t", 0}}).body["session"];
  auto cmds = script(city, id);
  for (const auto& c : cmds) ASSERT_EQ(call(api, c.method, c.path, c.body).status, 200) << c.path;

  session::SessionHost direct(city);
  auto did = direct.start_session(1, 0);
  run_direct(direct, did, cmds);
  EXPECT_EQ(api.host().state(), direct.state());
  EXPECT_EQ(call(api, "GET", "/api/sessions/" + id).body["phase"], "done");
}

TEST(Api, SameRequestsSameResponses) {
  const auto& city = mini_city();
  auto transcript = [&] {
    Api api(city);
    std::vector<json> out;
    out.push_back(call(api, "POST", "/api/sessions", {{"uid", 2}, {"t", 0}}).body);
    for (const auto& c : script(city, "s1")) out.push_back(call(api, c.method, c.path, c.body).body);
    out.push_back(call(api, "GET", "/api/analytics/prevailing").body);
    out.push_back(call(api, "GET", "/api/analytics/clusters", nullptr, {{"kmin", "2"}, {"kmax", "2"}}).body);
    return out;
  };
  auto a = transcript(), b = transcript();
  EXPECT_EQ(a, b);
}

TEST(Api, EveryFlowActionIsPushedOnce) {
  const auto& city = mini_city();
  Api api(city);
  std::string id = call(api, "POST", "/api/sessions", {{"t", 0}}).body["session"];
  std::vector<json> pushed;
  api.subscribe(id, [&](const session::PushEvent& e) {
    if (e.type == "flow-action") pushed.push_back(e.data);
  });
  std::vector<json> returned;
  for (const auto& c : script(city, id)) {
    auto r = call(api, c.method, c.path, c.body);
    for (const auto& a : r.body["actions"]) returned.push_back(a);
  }
  EXPECT_FALSE(returned.empty());
  EXPECT_EQ(pushed, returned);
}

TEST(Api, ReadsDoNotMutate) {
  const auto& city = mini_city();
  Api api(city);
  std::string id = call(api, "POST", "/api/sessions", {{"uid", 3}, {"t", 0}}).body["session"];
  for (const auto& c : script(city, id)) call(api, c.method, c.path, c.body);
  auto state = api.host().state();
  auto summary = call(api, "GET", "/api/analytics/summary").body;
  for (const char* path : {"/api/layout", "/api/layouts", "/api/doctrines", "/api/sessions", "/api/analytics/prevailing",
                           "/api/analytics/position/3", "/api/analytics/popularity/1", "/api/health"})
    EXPECT_EQ(call(api, "GET", path).status, 200) << path;
  EXPECT_EQ(api.host().state(), state);
  EXPECT_EQ(call(api, "GET", "/api/analytics/summary").body, summary);
  auto layout = call(api, "GET", "/api/layout").body;
  EXPECT_EQ(city::CityLayout::from_json(layout.dump()).to_json(), city.to_json());
}

TEST(Api, AnalyticsMirrorsTheModule) {
  const auto& city = mini_city();
  store::EventLog log;
  Api api(city, &log);
  for (int u = 1; u <= 5; ++u) {
    std::string id = call(api, "POST", "/api/sessions", {{"uid", u}, {"t", 0}}).body["session"];
    for (const auto& c : script(city, id)) call(api, c.method, c.path, c.body);
  }
  auto data = analytics::Dataset::from_log(log.records(), city);
  auto all = call(api, "GET", "/api/analytics/prevailing").body;
  EXPECT_EQ(all["all"]["pid"], analytics::prevailing_doctrine(data).pid);
  for (const auto& d : city.dilemmas()) {
    auto r = call(api, "GET", "/api/analytics/prevailing", nullptr, {{"did", std::to_string(d.did)}}).body;
    EXPECT_EQ(r["pid"], d.choices[d.did % 5].pid);
    EXPECT_EQ(r["counts"][std::to_string(r["pid"].get<int>())], 5);
  }
  auto pos = call(api, "GET", "/api/analytics/position/2").body;
  EXPECT_EQ(pos["pid"], analytics::predominant_position(data, 2).pid);
  auto pop = call(api, "GET", "/api/analytics/popularity/" + std::to_string(city.dilemmas()[0].sid)).body;
  EXPECT_EQ(pop["visits"], 5);
}

TEST(Api, RestartRestoresFromTheLog) {
  auto path = fs::path(::testing::TempDir()) / "epolis_service_restart.log";
  fs::remove(path);
  const auto& city = mini_city();
  session::HostState before;
  {
    store::EventLog log(path.string());
    Api api(city, &log);
    std::string id = call(api, "POST", "/api/sessions", {{"uid", 4}, {"t", 0}}).body["session"];
    auto cmds = script(city, id);
    for (std::size_t i = 0; i < 7; ++i) call(api, cmds[i].method, cmds[i].path, cmds[i].body);
    before = api.host().state();
  }
  store::EventLog log(path.string());
  auto records = log.records().size();
  Api api(city, &log);
  EXPECT_EQ(api.host().state(), before);
  EXPECT_EQ(log.records().size(), records);
  auto r = call(api, "POST", "/api/sessions", {});
  EXPECT_EQ(r.body["uid"], 5);
  EXPECT_EQ(r.body["session"], "s2");
  fs::remove(path);
}

TEST(Config, FileThenEnvironment) {
  auto path = fs::path(::testing::TempDir()) / "epolis_service.json";
  std::ofstream(path) << R"({"port": 9000, "data_dir": "/srv/epolis", "layout": "city.json"})";
  std::map<std::string, std::string> env;
  auto lookup = [&](const std::string& k) -> std::optional<std::string> {
    auto it = env.find(k);
    return it == env.end() ? std::nullopt : std::optional(it->second);
  };
  auto c = ServiceConfig::load(path.string(), lookup);
  EXPECT_EQ(c.port, 9000);
  EXPECT_EQ(c.resolve(c.layout), "/srv/epolis/city.json");
  EXPECT_EQ(c.resolve("/abs/x.log"), "/abs/x.log");
  env = {{"EPOLIS_PORT", "9100"}, {"EPOLIS_DATA_DIR", "/tmp/d"}, {"EPOLIS_LAYOUT", "other.json"}};
  c = ServiceConfig::load(path.string(), lookup);
  EXPECT_EQ(c.port, 9100);
  EXPECT_EQ(c.resolve(c.layout), "/tmp/d/other.json");
  env = {{"EPOLIS_PORT", "http"}};
  EXPECT_THROW(ServiceConfig::load(path.string(), lookup), Error);
  env.clear();
  std::ofstream(path) << R"({"colour": "blue"})";
  EXPECT_THROW(ServiceConfig::load(path.string(), lookup), Error);
  EXPECT_THROW(ServiceConfig::load("/nonexistent/epolis.json", lookup), Error);
  EXPECT_EQ(ServiceConfig::load(std::nullopt, lookup).port, 8080);
  fs::remove(path);
}

TEST(Http, ScriptedSessionOverTheWire) {
  const auto& city = default_city();
  Api api(city);
  Server server(api, "127.0.0.1", 0);
  int port = server.start();
  httplib::Client cli("127.0.0.1", port);
  auto created = cli.Post("/api/sessions", json{{"uid", 1}, {"t", 0}}.dump(), "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201);
  std::string id = json::parse(created->body)["session"];
  auto cmds = script(city, id);
  for (const auto& c : cmds) {
    auto r = cli.Post(c.path, c.body.dump(), "application/json");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << c.path << " " << r->body;
  }
  auto bad = cli.Post("/api/sessions/" + id + "/vote", R"({"verdict": 2})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 409);
  EXPECT_EQ(json::parse(bad->body)["error"]["code"], "wrong-phase");

  session::SessionHost direct(city);
  run_direct(direct, direct.start_session(1, 0), cmds);
  EXPECT_EQ(api.host().state(), direct.state());
  server.stop();
}

TEST(Http, EventStreamDeliversFlowActions) {
  const auto& city = mini_city();
  Api api(city);
  Server server(api, "127.0.0.1", 0);
  int port = server.start();
  httplib::Client cli("127.0.0.1", port);
  std::string id = json::parse(cli.Post("/api/sessions", R"({"t": 0})", "application/json")->body)["session"];

  std::promise<void> connected;
  std::string received;
  std::mutex mu;
  std::atomic<bool> done{false};
  std::thread reader([&] {
    httplib::Client sse("127.0.0.1", port);
    sse.set_read_timeout(5, 0);
    bool signalled = false;
    sse.Get("/api/sessions/" + id + "/events", [&](const char* data, std::size_t len) {
      std::lock_guard lock(mu);
      received.append(data, len);
      if (!signalled) {
        signalled = true;
        connected.set_value();
      }
      return !done.load();
    });
  });
  ASSERT_EQ(connected.get_future().wait_for(std::chrono::seconds(5)), std::future_status::ready);
  const auto& d = city.dilemmas()[0];
  auto r = cli.Post("/api/sessions/" + id + "/move", at(oracle::approach(city, d.sid).inner, 1000).dump(),
                    "application/json");
  ASSERT_EQ(r->status, 200);
  bool seen = false;
  for (int i = 0; i < 100 && !seen; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    std::lock_guard lock(mu);
    seen = received.find("transport-to-dilemma") != std::string::npos;
  }
  done = true;
  EXPECT_TRUE(seen) << received;
  {
    std::lock_guard lock(mu);
    EXPECT_NE(received.find("event: flow-action\ndata: "), std::string::npos);
  }
  server.stop();
  reader.join();

  auto missing = httplib::Client("127.0.0.1", port).Get("/api/sessions/s9/events");
  EXPECT_FALSE(missing);  // server stopped
}

TEST(Http, UnknownStreamIsAJsonError) {
  Api api(mini_city());
  Server server(api, "127.0.0.1", 0);
  int port = server.start();
  httplib::Client cli("127.0.0.1", port);
  auto r = cli.Get("/api/sessions/s9/events");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(json::parse(r->body)["error"]["code"], "unknown-id");
  server.stop();
}
