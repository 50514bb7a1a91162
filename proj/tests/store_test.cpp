#include <gtest/gtest.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "epolis/error.hpp"
#include "epolis/store/event_log.hpp"
#include "epolis/store/prefs.hpp"

using namespace epolis;
using namespace epolis::store;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("epolis_store_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

EventRecord move(std::int64_t t, double x) {
  EventRecord r;
  r.logical = t;
  r.session = "s1";
  r.kind = RecordKind::Move;
  r.payload = {{"x", x}, {"y", 0}, {"z", 1}};
  return r;
}

LogOptions fixed_clock() {
  LogOptions o;
  o.wall_clock = [] { return std::int64_t{1'700'000'000'000}; };
  return o;
}

struct CollectingSink : RemoteSink {
  std::vector<std::vector<EventRecord>> batches;
  void forward(const std::vector<EventRecord>& batch) override { batches.push_back(batch); }
};

}  // namespace

TEST(EventLog, LineFormatIsExact) {
  EventRecord r;
  r.seq = 1;
  r.wall = 1'700'000'000'000;
  r.logical = 1500;
  r.session = "s1";
  r.kind = RecordKind::Choice;
  r.payload = {{"uid", 7}, {"did", 1}, {"cid", 3}};
  // checksum from Python's zlib.crc32 over the other fields
  EXPECT_EQ(format_record(r), R"(1|1700000000000|1500|s1|choice|01f4733f|{"cid":3,"did":1,"uid":7})");
  EXPECT_EQ(parse_record(format_record(r), "x"), r);
}

TEST(EventLog, KindNamesRoundTrip) {
  for (int k = 0; k <= static_cast<int>(RecordKind::SimMarker); ++k)
    EXPECT_EQ(record_kind_from(to_string(static_cast<RecordKind>(k))), static_cast<RecordKind>(k));
  EXPECT_EQ(to_string(RecordKind::SessionStart), "session-start");
  EXPECT_THROW(record_kind_from("teleport"), Error);
}

TEST(EventLog, FirstAppendIsSeqOne) {
  EventLog log;
  EXPECT_EQ(log.append(move(0, 1)), 1);
}

TEST(EventLog, TenThousandAppendsAreGapless) {
  TempDir dir;
  std::string path = dir.file("log");
  {
    EventLog log(path, fixed_clock());
    for (int i = 0; i < 10'000; ++i) ASSERT_EQ(log.append(move(i, i)), i + 1);
  }
  auto records = read_log(path);
  ASSERT_EQ(records.size(), 10'000u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    ASSERT_EQ(records[i].seq, static_cast<std::int64_t>(i) + 1);
    ASSERT_EQ(records[i].logical, static_cast<std::int64_t>(i));
  }
}

TEST(EventLog, RecordsSurviveReopen) {
  TempDir dir;
  std::string path = dir.file("log");
  {
    EventLog log(path);
    log.append(move(1, 1));
    log.append(move(2, 2));
  }
  EventLog again(path);
  EXPECT_EQ(again.last_seq(), 2);
  EXPECT_EQ(again.append(move(3, 3)), 3);
  EXPECT_EQ(read_log(path).size(), 3u);
  EXPECT_EQ(read_log(path)[1].payload.at("x"), 2);
}

TEST(EventLog, TamperedRecordIsDetected) {
  TempDir dir;
  std::string path = dir.file("log");
  {
    EventLog log(path);
    for (int i = 0; i < 5; ++i) log.append(move(i, 10 + i));
  }
  std::string text = slurp(path);
  auto pos = text.find("\"x\":12");
  ASSERT_NE(pos, std::string::npos);
  text[pos + 5] = '9';
  spill(path, text);
  try {
    read_log(path);
    FAIL() << "tampered log accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Corrupt);
    EXPECT_NE(std::string(e.what()).find(path + ":3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(EventLog{path}, Error);
}

TEST(EventLog, SeqGapIsCorruption) {
  EventRecord a = move(0, 0), b = move(1, 1);
  a.seq = 1;
  b.seq = 3;
  std::string text = format_record(a) + "\n" + format_record(b) + "\n";
  EXPECT_THROW(parse_log(text, "log"), Error);
}

TEST(EventLog, UnfinishedLastLineIsDroppedOnReopen) {
  TempDir dir;
  std::string path = dir.file("log");
  {
    EventLog log(path);
    log.append(move(1, 1));
    log.append(move(2, 2));
  }
  std::string text = slurp(path);
  std::string torn = text.substr(0, text.size() - 7);
  spill(path, torn);
  EXPECT_EQ(read_log(path).size(), 1u);
  EventLog log(path);
  EXPECT_EQ(log.append(move(3, 3)), 2);
  auto records = read_log(path);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[1].logical, 3);
}

TEST(EventLog, EmptyLogReadsEmpty) {
  TempDir dir;
  spill(dir.file("log"), "");
  EXPECT_TRUE(read_log(dir.file("log")).empty());
  EXPECT_THROW(read_log(dir.file("missing")), Error);
}

TEST(EventLog, SessionIdsCannotBreakTheFormat) {
  EventLog log;
  EventRecord r = move(0, 0);
  r.session = "a|b";
  EXPECT_THROW(log.append(r), Error);
  EXPECT_EQ(log.last_seq(), 0);
}

TEST(EventLog, RemoteSinkGetsBatchesInOrder) {
  auto sink = std::make_shared<CollectingSink>();
  LogOptions o;
  o.remote = sink;
  o.remote_batch = 4;
  {
    EventLog log("", o);
    for (int i = 0; i < 10; ++i) log.append(move(i, i));
    EXPECT_EQ(sink->batches.size(), 2u);
  }
  ASSERT_EQ(sink->batches.size(), 3u);
  std::int64_t seq = 0;
  for (const auto& b : sink->batches)
    for (const auto& r : b) EXPECT_EQ(r.seq, ++seq);
  EXPECT_EQ(seq, 10);
}

TEST(EventLog, NoRemoteByDefault) {
  LogOptions o;
  EXPECT_EQ(o.remote, nullptr);
}

TEST(Prefs, SetThenGet) {
  TempDir dir;
  PrefsStore p(dir.file("prefs"));
  EXPECT_EQ(p.get("a"), std::nullopt);
  p.set("a", "true");
  EXPECT_EQ(p.get("a"), "true");
  PrefsStore reread(dir.file("prefs"));
  EXPECT_EQ(reread.get("a"), "true");
}

TEST(Prefs, FileIsSortedKeyValueLines) {
  TempDir dir;
  PrefsStore p(dir.file("prefs"));
  p.set("zeta", "1");
  p.set("alpha", "2");
  p.set_many({{"mid", "3"}, {"alpha", "4"}});
  EXPECT_EQ(slurp(dir.file("prefs")), "alpha=4\nmid=3\nzeta=1\n");
  EXPECT_FALSE(fs::exists(dir.file("prefs.tmp")));
  EXPECT_THROW(p.set("a=b", "1"), Error);
  EXPECT_THROW(p.set("k", "two\nlines"), Error);
}

TEST(Prefs, WatcherSeesEveryChangeInOrder) {
  PrefsStore p;
  std::vector<std::string> seen;
  auto id = p.watch([&](const std::string& k, const std::string& v) { seen.push_back(k + "=" + v); });
  std::mt19937 rng(5);
  std::vector<std::string> expected;
  for (int i = 0; i < 200; ++i) {
    std::string k = "k" + std::to_string(rng() % 10), v = std::to_string(i);
    p.set(k, v);
    expected.push_back(k + "=" + v);
  }
  EXPECT_EQ(seen, expected);
  p.set("k0", p.get("k0").value_or(""));  // unchanged value, no notification
  EXPECT_EQ(seen.size(), 200u);
  p.unwatch(id);
  p.set("k1", "x");
  EXPECT_EQ(seen.size(), 200u);
}

TEST(Prefs, KilledWriterLeavesAWholeSortedFile) {
  TempDir dir;
  std::string path = dir.file("prefs");
  std::mt19937 rng(9);
  for (int round = 0; round < 20; ++round) {
    pid_t child = fork();
    ASSERT_GE(child, 0);
    if (child == 0) {
      PrefsStore p(path);
      for (int i = 0;; ++i) {
        std::map<std::string, std::string> batch;
        for (int k = 0; k < 50; ++k) batch["key" + std::to_string((i * 7 + k) % 300)] = std::to_string(i);
        p.set_many(batch);
      }
    }
    ::usleep(1000 + rng() % 20000);
    ::kill(child, SIGKILL);
    int status = 0;
    ::waitpid(child, &status, 0);
    if (!fs::exists(path)) continue;
    std::string text = slurp(path);
    auto values = parse_prefs(text, path);
    EXPECT_EQ(format_prefs(values), text) << "round " << round;
    PrefsStore reopened(path);
    EXPECT_EQ(reopened.all(), values);
  }
}
