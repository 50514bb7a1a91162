#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace epolis::store {

enum class RecordKind { SessionStart, Move, ZoneEnter, ZoneExit, DilemmaOpen, Choice, Transform, Vote, SimMarker };

std::string_view to_string(RecordKind k);
RecordKind record_kind_from(std::string_view name);  // throws Corrupt

struct EventRecord {
  std::int64_t seq = 0;      // assigned by append
  std::int64_t wall = 0;     // ms since the epoch, assigned by append
  std::int64_t logical = 0;  // game clock, ms
  std::string session;
  RecordKind kind = RecordKind::Move;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

// One line, no trailing newline: seq|wall|logical|session|kind|crc32|payload.
std::string format_record(const EventRecord& r);
// Throws Corrupt with `where` prefixed to the message.
EventRecord parse_record(std::string_view line, const std::string& where);

// Stand-in for a remote database: receives appended records in batches.
class RemoteSink {
 public:
  virtual ~RemoteSink() = default;
  virtual void forward(const std::vector<EventRecord>& batch) = 0;
};

struct LogOptions {
  bool sync = true;  // fsync before append returns
  std::function<std::int64_t()> wall_clock;  // defaults to the system clock
  std::shared_ptr<RemoteSink> remote;        // none by default
  std::size_t remote_batch = 64;
};

// Append-only record log. An empty path keeps the log in memory.
class EventLog {
 public:
  explicit EventLog(std::string path = "", LogOptions options = {});
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  // Assigns seq and wall time, writes, and returns the seq.
  std::int64_t append(EventRecord r);
  const std::vector<EventRecord>& records() const { return records_; }
  std::int64_t last_seq() const { return static_cast<std::int64_t>(records_.size()); }
  const std::string& path() const { return path_; }
  // Forwards any records still waiting for the remote sink.
  void flush_remote();

 private:
  std::string path_;
  LogOptions options_;
  std::FILE* file_ = nullptr;
  std::vector<EventRecord> records_;
  std::vector<EventRecord> outbox_;
};

// Reads a whole log. A final line without its newline is a write the writer
// never finished and is ignored. Any other damage throws Corrupt naming the
// line; gaps in seq count as damage.
std::vector<EventRecord> read_log(const std::string& path);
std::vector<EventRecord> parse_log(std::string_view text, const std::string& origin);

}  // namespace epolis::store
