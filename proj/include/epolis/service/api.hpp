#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "epolis/city/layout.hpp"
#include "epolis/session/host.hpp"

namespace epolis::service {

// Read from a JSON file, then overridden by EPOLIS_PORT, EPOLIS_DATA_DIR and
// EPOLIS_LAYOUT. Relative paths resolve against data_dir.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = ".";
  std::string layout = "layout.json";  // generated with default parameters when missing
  std::string log = "events.log";
  std::string prefs = "prefs.txt";

  using Env = std::function<std::optional<std::string>(const std::string&)>;
  static Env process_env();
  // Throws Validation for unknown keys or bad values, Io for an unreadable file.
  static ServiceConfig load(const std::optional<std::string>& path, const Env& env = process_env());
  std::string resolve(const std::string& path) const;
  nlohmann::json to_json() const;
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// wrong-phase 409, unknown-id 404, invalid-choice 422, validation 400,
// anything else internal 500.
ApiResponse error_response(const std::exception& e);

// Transport-free request handling; the HTTP server and the tests share it.
// Commands may carry a logical time "t" in ms; otherwise the service clock is
// used, never running behind the session's own clock.
class Api {
 public:
  Api(const city::CityLayout& layout, store::EventLog* log = nullptr, store::PrefsStore* prefs = nullptr,
      std::string layout_id = "default");

  ApiResponse handle(const ApiRequest& request);

  // Push events for one session plus the city-wide ones.
  using Listener = std::function<void(const session::PushEvent&)>;
  std::size_t subscribe(const std::string& session, Listener l);
  void unsubscribe(std::size_t id) { host_.unsubscribe(id); }
  bool has_session(const std::string& id) const { return host_.has_session(id); }

  session::SessionHost& host() { return host_; }
  const session::SessionHost& host() const { return host_; }

 private:
  nlohmann::json session_resource(const session::PlayerSession& s) const;
  nlohmann::json outcome_body(const session::Outcome& o) const;
  std::int64_t time_for(const nlohmann::json& body, std::int64_t floor);
  std::optional<ApiResponse> analytics(const ApiRequest& request, const std::vector<std::string>& parts);

  const city::CityLayout* layout_;
  std::string layout_id_;
  std::unique_ptr<store::EventLog> own_log_;
  store::EventLog* log_;
  session::SessionHost host_;
  std::int64_t clock_base_ = 0;
  std::chrono::steady_clock::time_point started_;
  std::int64_t next_uid_ = 1;
};

std::string format_sse(const session::PushEvent& e);

// HTTP front end over an Api. Event streams are server-sent events.
class Server {
 public:
  Server(Api& api, std::string host, int port);
  ~Server();
  // Binds and serves on a background thread; returns the bound port (useful
  // with port 0).
  int start();
  void stop();
  // Binds and serves on the calling thread until stop().
  void run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace epolis::service
