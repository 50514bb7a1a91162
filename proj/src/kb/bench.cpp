#include "epolis/kb/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>

namespace epolis::kb {

BenchResult position_throughput(const std::vector<lang::FactLiteral>& static_facts, const BenchOptions& options) {
  KnowledgeBase kb;
  kb.load_static(static_facts);
  for (int u = 1; u <= options.users; ++u) kb.add_user(u);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> stride(-1.5, 1.5);
  std::vector<std::pair<double, double>> at(options.users);
  for (auto& [x, z] : at) {
    x = std::uniform_real_distribution<double>(0, options.width)(rng);
    z = std::uniform_real_distribution<double>(0, options.depth)(rng);
  }
  std::vector<SalEvent> events;
  events.reserve(options.events);
  for (std::size_t n = 0; n < options.events; ++n) {
    int u = static_cast<int>(n % options.users);
    auto& [x, z] = at[u];
    x = std::clamp(x + stride(rng), 0.0, options.width);
    z = std::clamp(z + stride(rng), 0.0, options.depth);
    events.push_back(SalEvent::position(u + 1, static_cast<std::int64_t>(n) * 10, x, 0, z));
  }

  auto start = std::chrono::steady_clock::now();
  for (std::size_t n = 0; n < events.size(); ++n) {
    kb.assert_event(events[n]);
    if (options.compact_every && (n + 1) % options.compact_every == 0) kb.compact(events[n].time);
  }
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  BenchResult r;
  r.events = events.size();
  r.seconds = seconds;
  r.events_per_second = seconds > 0 ? events.size() / seconds : 0;
  r.facts_after = kb.engine().facts().size();
  return r;
}

}  // namespace epolis::kb
