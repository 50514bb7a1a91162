#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "epolis/session/session.hpp"
#include "epolis/store/event_log.hpp"
#include "epolis/store/prefs.hpp"

namespace epolis::session {

// A server-push message. `session` is empty for city-wide updates.
struct PushEvent {
  std::string session;
  std::string type;  // flow-action, transform, prevailing-update
  nlohmann::json data;
};

struct SessionSnapshot {
  std::int64_t uid = 0;
  Phase phase = Phase::Roaming;
  city::Vec3 position;
  std::optional<city::Vec3> return_pose;
  std::set<std::int64_t> answered;
  std::optional<std::int64_t> verdict;
  std::map<std::int64_t, city::BlockState> blocks;
  std::map<std::string, bool> flags;

  friend bool operator==(const SessionSnapshot&, const SessionSnapshot&) = default;
};

struct HostState {
  std::map<std::string, SessionSnapshot> sessions;
  std::map<std::string, bool> city_flags;

  friend bool operator==(const HostState&, const HostState&) = default;
};
nlohmann::json to_json(const SessionSnapshot& s);
nlohmann::json to_json(const HostState& s);

// Runs any number of player sessions over one layout. Each session has its
// own knowledge base; a shared aggregator receives every choice and vote.
// Commands are serialised by one mutex.
class SessionHost {
 public:
  SessionHost(const city::CityLayout& layout, SessionOptions options = {}, store::EventLog* log = nullptr,
              store::PrefsStore* prefs = nullptr);
  ~SessionHost();

  std::string start_session(std::int64_t uid, std::int64_t t, std::optional<city::Vec3> spawn = std::nullopt);
  Outcome move(const std::string& id, const city::Vec3& p, std::int64_t t);
  Outcome choice(const std::string& id, std::int64_t did, std::optional<std::int64_t> cid, std::int64_t t);
  Outcome vote(const std::string& id, std::int64_t verdict, std::int64_t t);
  // Inactivity check for every unfinished session.
  void tick(std::int64_t now);

  // Re-executes one logged command. Derived records are skipped.
  void apply(const store::EventRecord& r);
  // Restores from `records` without logging them, then logs to `log` from
  // here on. Used when a service restarts over its own log.
  void restore(const std::vector<store::EventRecord>& records, store::EventLog* log);

  bool has_session(const std::string& id) const;
  const PlayerSession& session(const std::string& id) const;  // throws UnknownId
  std::vector<std::string> session_ids() const;
  const kb::KnowledgeBase& aggregator() const { return *aggregator_; }
  const city::CityLayout& layout() const { return *layout_; }
  HostState state() const;

  using Listener = std::function<void(const PushEvent&)>;
  std::size_t subscribe(Listener l);
  void unsubscribe(std::size_t id);

  // Callers that read several values consistently hold this.
  std::recursive_mutex& mutex() const { return mu_; }

 private:
  PlayerSession& find(const std::string& id);
  void log(const std::string& session, store::RecordKind kind, std::int64_t t, nlohmann::json payload);
  void commit(const std::string& session, store::RecordKind kind, std::int64_t t, nlohmann::json payload);
  void publish(const std::string& session, const Outcome& out);
  void push(const PushEvent& e);
  void aggregate_choice(std::int64_t uid, std::int64_t did, std::int64_t cid, std::int64_t t);
  void aggregate_vote(std::int64_t uid, std::int64_t verdict, std::int64_t t);
  std::int64_t aggregator_time(std::int64_t uid, std::int64_t t);

  const city::CityLayout* layout_;
  SessionOptions options_;
  store::EventLog* log_;
  store::PrefsStore* prefs_;
  std::unique_ptr<kb::KnowledgeBase> aggregator_;
  std::map<std::int64_t, std::int64_t> aggregator_clock_;
  std::map<std::int64_t, std::int64_t> prevailing_;
  std::optional<std::int64_t> prevailing_verdict_;
  std::map<std::string, std::unique_ptr<PlayerSession>> sessions_;
  std::int64_t next_session_ = 1;
  std::vector<std::tuple<store::RecordKind, std::int64_t, nlohmann::json>> derived_;
  std::map<std::size_t, Listener> listeners_;
  std::size_t next_listener_ = 1;
  mutable std::recursive_mutex mu_;
};

// Feeds the command records of `records` into a fresh host and returns its
// final state. When `relog` is given, the replayed host writes its own log
// there, which should match the original apart from wall times.
HostState replay(const std::vector<store::EventRecord>& records, const city::CityLayout& layout,
                 SessionOptions options = {}, store::EventLog* relog = nullptr);

}  // namespace epolis::session
