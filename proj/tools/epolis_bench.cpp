// Position-update throughput through the knowledge base on the default city.
// Appends one JSON line per run to --out so results can be tracked over time.

#include <CLI11.hpp>
#include <algorithm>
#include <ctime>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "epolis/city/layout.hpp"
#include "epolis/kb/bench.hpp"

using namespace epolis;

int main(int argc, char** argv) {
  CLI::App app{"epolis knowledge-base throughput benchmark"};
  kb::BenchOptions opts;
  std::string out;
  int repeat = 3;
  app.add_option("--events", opts.events, "position updates per run")->check(CLI::PositiveNumber);
  app.add_option("--users", opts.users, "players walking concurrently")->check(CLI::PositiveNumber);
  app.add_option("--seed", opts.seed, "random walk seed");
  app.add_option("--compact-every", opts.compact_every, "events between compactions, 0 = never");
  app.add_option("--repeat", repeat, "runs; the median is reported")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "append a JSON result line to this file");
  CLI11_PARSE(app, argc, argv);

  auto layout = city::CityLayout::generate(city::LayoutParams{});
  opts.width = layout.width();
  opts.depth = layout.depth();
  auto facts = layout.static_facts();

  std::vector<kb::BenchResult> runs;
  for (int r = 0; r < repeat; ++r) {
    runs.push_back(kb::position_throughput(facts, opts));
    std::cout << "run " << r + 1 << ": " << runs.back().events << " events in " << runs.back().seconds << " s, "
              << static_cast<long>(runs.back().events_per_second) << " events/s\n";
  }
  std::sort(runs.begin(), runs.end(),
            [](const auto& a, const auto& b) { return a.events_per_second < b.events_per_second; });
  const auto& median = runs[runs.size() / 2];
  std::cout << "median: " << static_cast<long>(median.events_per_second) << " events/s\n";

  if (!out.empty()) {
    nlohmann::json line = {{"time", static_cast<std::int64_t>(std::time(nullptr))},
                           {"version", EPOLIS_VERSION},
                           {"events", opts.events},
                           {"users", opts.users},
                           {"compact_every", opts.compact_every},
                           {"seed", opts.seed},
                           {"events_per_second", median.events_per_second},
                           {"facts_after", median.facts_after}};
    std::ofstream f(out, std::ios::app);
    if (!f) {
      std::cerr << out << ": cannot open\n";
      return 2;
    }
    f << line.dump() << '\n';
  }
  return 0;
}
