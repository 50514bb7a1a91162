#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "epolis/session/host.hpp"
#include "support/players.hpp"

using namespace epolis;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Result cli(const std::string& args) {
  std::string command = std::string(EPOLIS_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(command.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::path(::testing::TempDir()) / ("epolis_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string d() const { return "--data-dir " + dir.string() + " "; }
  fs::path dir;
};

const std::string kData = EPOLIS_DATA_DIR;

}  // namespace

TEST_F(Cli, LayoutGenDefaultHasThirtySixBlocks) {
  auto r = cli("layout gen");
  ASSERT_EQ(r.code, 0) << r.out;
  auto layout = json::parse(r.out);
  EXPECT_EQ(layout["blocks"].size(), 36u);
  EXPECT_EQ(cli("layout gen").out, r.out);
  EXPECT_NE(cli("layout gen --seed 2").out, r.out);
  auto written = cli(d() + "layout gen --seed 2 --out city.json --format tsv");
  ASSERT_EQ(written.code, 0);
  EXPECT_NE(written.out.find("blocks\t36"), std::string::npos) << written.out;
  EXPECT_EQ(slurp(dir / "city.json"), cli("layout gen --seed 2").out);
}

TEST_F(Cli, ReteRunPrintsTheMaximum) {
  auto r = cli("rete run --rules " + kData + "/prevailing.prl --facts " + kData + "/prevailing_fixture.prl");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Choice 1 is the maximum"), std::string::npos) << r.out;
  auto t = cli("rete run --trace --rules " + kData + "/prevailing.prl --facts " + kData + "/prevailing_fixture.prl");
  EXPECT_NE(t.out.find("FIRE 1 "), std::string::npos) << t.out;
  EXPECT_LT(t.out.find("FIRE 1 "), t.out.find("Choice 1 is the maximum"));
}

TEST_F(Cli, RulesCheckReportsLocations) {
  EXPECT_EQ(cli("rules check").code, 0);
  EXPECT_EQ(cli("rules check " + kData + "/prevailing.prl " + kData + "/verdict.prl").code, 0);
  std::ofstream(dir / "bad.prl") << "(defrule r\n  (NoSuchTemplate (x 1))\n  =>\n  (printout t \"x\"))\n";
  auto r = cli(d() + "rules check bad.prl");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("bad.prl:2:"), std::string::npos) << r.out;
  EXPECT_EQ(cli("rules check /nonexistent.prl").code, 2);
}

TEST_F(Cli, ReplayOfEmptyLogIsFresh) {
  std::ofstream(dir / "events.log").close();
  auto r = cli(d() + "replay --log events.log");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out, "records 0, sessions 0\n");
  EXPECT_EQ(cli(d() + "replay --log missing.log").code, 2);
}

TEST_F(Cli, ReplaySummarisesRecordedSessions) {
  auto layout = city::CityLayout::generate(city::LayoutParams{});
  std::ofstream(dir / "layout.json") << layout.to_json();
  {
    store::EventLog log((dir / "events.log").string());
    session::SessionHost host(layout, {}, &log);
    std::int64_t t = 0;
    auto a = host.start_session(1, t);
    oracle::play_through(host, a, t, [](std::int64_t) { return 0; }, 5);
    host.start_session(2, t);
  }
  auto r = cli(d() + "replay --log events.log --out state.json");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("sessions 2"), std::string::npos);
  EXPECT_NE(r.out.find("done"), std::string::npos);
  EXPECT_NE(r.out.find("20/20"), std::string::npos);
  auto state = json::parse(slurp(dir / "state.json"));
  EXPECT_EQ(state["sessions"].size(), 2u);

  auto an = cli(d() + "analyze --log events.log --out report");
  ASSERT_EQ(an.code, 0) << an.out;
  EXPECT_NE(an.out.find("all"), std::string::npos);
  for (const char* f : {"answers.tsv", "prevailing.tsv", "popularity.tsv", "clusters.tsv", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / "report" / f)) << f;

  // A tampered record is an I/O class failure with its location.
  auto text = slurp(dir / "events.log");
  text[text.find("|move|") + 2] = 'X';
  std::ofstream(dir / "events.log", std::ios::trunc) << text;
  auto bad = cli(d() + "replay --log events.log");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.out.find("events.log:"), std::string::npos) << bad.out;
}

TEST_F(Cli, SimRunIsDeterministicPerSeed) {
  std::string cfg = kData + "/examples/sim.json";
  ASSERT_EQ(cli(d() + "sim run --config " + cfg + " --seed 4 --out a").code, 0);
  ASSERT_EQ(cli(d() + "sim run --config " + cfg + " --seed 4 --out b").code, 0);
  ASSERT_EQ(cli(d() + "sim run --config " + cfg + " --seed 5 --out c").code, 0);
  for (const char* f : {"distribution.tsv", "final_map.tsv", "trust.tsv", "manifest.json"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  EXPECT_NE(slurp(dir / "a" / "distribution.tsv"), slurp(dir / "c" / "distribution.tsv"));
}

TEST_F(Cli, SimSweepCoversTheGrid) {
  std::ofstream(dir / "grid.json") << R"({"dice": [0, 1], "seed": [1, 2, 3]})";
  std::ofstream(dir / "base.json") << R"({"agents": {"2": 20}, "max_steps": 300})";
  auto r = cli(d() + "sim sweep --config base.json --grid grid.json --out sweep --threads 2 --format tsv");
  ASSERT_EQ(r.code, 0) << r.out;
  int rows = 0;
  for (auto& e : fs::directory_iterator(dir / "sweep")) rows += e.is_directory();
  EXPECT_EQ(rows, 6);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 7);
  EXPECT_EQ(slurp(dir / "sweep" / "sweep.tsv"), r.out);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli("--help").code, 0);
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("layout gen --bogus").code, 1);
  EXPECT_EQ(cli("--format xml layout gen").code, 1);
  std::ofstream(dir / "bad.json") << R"({"dice": 2})";
  EXPECT_EQ(cli(d() + "sim run --config bad.json").code, 1);
  std::ofstream(dir / "layout_bad.json") << R"({"rows": 0})";
  EXPECT_EQ(cli(d() + "layout gen --config layout_bad.json").code, 1);
  EXPECT_EQ(cli(d() + "sim run --config nothing.json").code, 2);
  EXPECT_EQ(cli(d() + "serve --config nothing.json").code, 2);
}

TEST_F(Cli, HelpDocumentsEveryFlag) {
  auto top = cli("--help").out;
  for (const char* s : {"--data-dir", "--format", "layout", "rules", "rete", "dump-network", "sim", "analyze", "serve", "replay"})
    EXPECT_NE(top.find(s), std::string::npos) << s;
  auto an = cli("analyze --help").out;
  for (const char* s : {"--log", "--layout", "--out", "--kmin", "--kmax", "--seed", "--visit-dwell"})
    EXPECT_NE(an.find(s), std::string::npos) << s;
}

TEST_F(Cli, DumpNetworkCountsNodes) {
  auto r = cli("dump-network --format tsv");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("production\t20"), std::string::npos) << r.out;
}
