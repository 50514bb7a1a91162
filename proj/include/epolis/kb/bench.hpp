#pragma once

#include <cstdint>
#include <vector>

#include "epolis/kb/knowledge_base.hpp"

namespace epolis::kb {

struct BenchOptions {
  int users = 20;
  std::size_t events = 50'000;
  std::size_t compact_every = 1'000;  // 0 = never
  std::uint64_t seed = 1;
  double width = 300, depth = 300;    // players wander inside [0, width] x [0, depth]
};

struct BenchResult {
  std::size_t events = 0;
  double seconds = 0;
  double events_per_second = 0;
  std::size_t facts_after = 0;
};

// Streams random-walk position updates for several players through a knowledge
// base running the builtin program over `static_facts`. Event generation happens
// before the clock starts.
BenchResult position_throughput(const std::vector<lang::FactLiteral>& static_facts, const BenchOptions& options);

}  // namespace epolis::kb
