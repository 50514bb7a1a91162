#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "epolis/session/host.hpp"

namespace epolis::oracle {

// Road, outer-zone and inner-zone sample points for walking into a block
// from the road on its west side.
struct Approach {
  city::Vec3 road, outer, inner;
};
Approach approach(const city::CityLayout& layout, std::int64_t sid);

// Plays one session through every dilemma in did order, choosing with `pick`
// (choice index 0..4), then votes. Times advance by `step` per command.
using Picker = std::function<int(std::int64_t did)>;
void play_through(session::SessionHost& host, const std::string& id, std::int64_t& t, const Picker& pick,
                  std::int64_t verdict, std::int64_t step = 1000);

// One fuzzed command for a session: random moves between road, outer and
// inner points of random blocks, choices (sometimes invalid or missing) while
// in a dilemma, and a vote when voting. Errors the host rejects are swallowed
// and counted.
struct Fuzzer {
  std::mt19937_64 rng;
  std::size_t rejected = 0;
  explicit Fuzzer(std::uint64_t seed) : rng(seed) {}
  void step(session::SessionHost& host, const std::string& id, std::int64_t& t);
};

}  // namespace epolis::oracle
