#include "epolis/store/event_log.hpp"

#include <chrono>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>
#include <zlib.h>

#include "epolis/error.hpp"

namespace epolis::store {

namespace {

constexpr std::string_view kKinds[] = {"session-start", "move",     "zone-enter", "zone-exit", "dilemma-open",
                                       "choice",        "transform", "vote",      "sim-marker"};

std::uint32_t crc(std::string_view text) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size())));
}

// The checksum covers every other field in order, '|'-joined.
std::string body(const EventRecord& r, const std::string& payload) {
  return std::to_string(r.seq) + '|' + std::to_string(r.wall) + '|' + std::to_string(r.logical) + '|' +
         r.session + '|' + std::string(to_string(r.kind)) + '|' + payload;
}

std::int64_t to_int(std::string_view s, const std::string& where, const char* field) {
  std::int64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty())
    throw Error(ErrorCode::Corrupt, where + ": bad " + field + " '" + std::string(s) + "'");
  return v;
}

std::int64_t system_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

std::string_view to_string(RecordKind k) { return kKinds[static_cast<int>(k)]; }

RecordKind record_kind_from(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kKinds); ++i)
    if (kKinds[i] == name) return static_cast<RecordKind>(i);
  throw Error(ErrorCode::Corrupt, "unknown record kind '" + std::string(name) + "'");
}

std::string format_record(const EventRecord& r) {
  if (r.session.find_first_of("|\n") != std::string::npos)
    throw Error(ErrorCode::Validation, "session id may not contain '|' or a newline");
  std::string payload = r.payload.dump();
  char sum[9];
  std::snprintf(sum, sizeof sum, "%08x", crc(body(r, payload)));
  return std::to_string(r.seq) + '|' + std::to_string(r.wall) + '|' + std::to_string(r.logical) + '|' +
         r.session + '|' + std::string(to_string(r.kind)) + '|' + sum + '|' + payload;
}

EventRecord parse_record(std::string_view line, const std::string& where) {
  std::string_view f[6];
  std::size_t pos = 0;
  for (auto& field : f) {
    std::size_t bar = line.find('|', pos);
    if (bar == std::string_view::npos) throw Error(ErrorCode::Corrupt, where + ": truncated record");
    field = line.substr(pos, bar - pos);
    pos = bar + 1;
  }
  std::string_view payload = line.substr(pos);
  EventRecord r;
  r.seq = to_int(f[0], where, "seq");
  r.wall = to_int(f[1], where, "wall time");
  r.logical = to_int(f[2], where, "logical time");
  r.session = std::string(f[3]);
  try {
    r.kind = record_kind_from(f[4]);
  } catch (const Error& e) {
    throw Error(ErrorCode::Corrupt, where + ": " + e.what());
  }
  char sum[9];
  std::string text(payload);
  std::snprintf(sum, sizeof sum, "%08x", crc(body(r, text)));
  if (f[5] != sum) throw Error(ErrorCode::Corrupt, where + ": checksum mismatch");
  try {
    r.payload = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Corrupt, where + ": payload is not JSON");
  }
  return r;
}

std::vector<EventRecord> parse_log(std::string_view text, const std::string& origin) {
  std::vector<EventRecord> out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) break;  // unfinished write
    ++line_no;
    std::string where = origin + ":" + std::to_string(line_no);
    EventRecord r = parse_record(text.substr(pos, nl - pos), where);
    if (r.seq != static_cast<std::int64_t>(out.size()) + 1)
      throw Error(ErrorCode::Corrupt, where + ": expected seq " + std::to_string(out.size() + 1) + ", found " +
                                          std::to_string(r.seq));
    out.push_back(std::move(r));
    pos = nl + 1;
  }
  return out;
}

std::vector<EventRecord> read_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_log(ss.str(), path);
}

// ------------------------------------------------------------------ EventLog --

EventLog::EventLog(std::string path, LogOptions options) : path_(std::move(path)), options_(std::move(options)) {
  if (!options_.wall_clock) options_.wall_clock = system_ms;
  if (path_.empty()) return;
  std::size_t committed = 0;
  if (std::ifstream in{path_, std::ios::binary}) {
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    records_ = parse_log(text, path_);
    committed = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
    if (committed != text.size() && truncate(path_.c_str(), static_cast<off_t>(committed)) != 0)
      throw Error(ErrorCode::Io, "cannot drop the unfinished record at the end of " + path_);
  }
  file_ = std::fopen(path_.c_str(), "ab");
  if (!file_) throw Error(ErrorCode::Io, "cannot open " + path_ + " for appending");
}

EventLog::~EventLog() {
  try {
    flush_remote();
  } catch (...) {
  }
  if (file_) std::fclose(file_);
}

std::int64_t EventLog::append(EventRecord r) {
  r.seq = last_seq() + 1;
  r.wall = options_.wall_clock();
  std::string line = format_record(r) + '\n';
  if (file_) {
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0)
      throw Error(ErrorCode::Io, "write to " + path_ + " failed");
    if (options_.sync && fsync(fileno(file_)) != 0) throw Error(ErrorCode::Io, "fsync of " + path_ + " failed");
  }
  records_.push_back(r);
  if (options_.remote) {
    outbox_.push_back(std::move(r));
    if (outbox_.size() >= options_.remote_batch) flush_remote();
  }
  return records_.back().seq;
}

void EventLog::flush_remote() {
  if (!options_.remote || outbox_.empty()) return;
  options_.remote->forward(outbox_);
  outbox_.clear();
}

}  // namespace epolis::store
