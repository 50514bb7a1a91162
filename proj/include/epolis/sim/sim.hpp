#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "epolis/city/layout.hpp"
#include "epolis/city/state.hpp"

namespace epolis::sim {

enum class Movement { RandomWalk, Pedestrian };
enum class Scenario { Corner, Scattered };
enum class Leader { None, Positive, Negative };

struct SimParams {
  std::map<std::int64_t, int> agents;              // breed pid -> count
  std::map<std::string, int> institutions;         // kind -> blocks re-labelled with it
  int challenges = 0;                              // carried through, no effect on agents
  Movement movement = Movement::RandomWalk;
  Scenario scenario = Scenario::Scattered;
  double dice = 0.5;
  std::map<std::string, double> location_influence = default_location_influence();
  int positive_leaders = 0;
  int negative_leaders = 0;
  double interaction_radius = 10;  // m
  double step_length = 2;          // m
  int max_steps = 2000;
  int window = 100;                // steps without change that count as converged
  std::uint64_t seed = 1;

  double lambda = 0.05;
  double initial_trust = 0.5;
  double influence_decay = 0;  // 0 keeps location influence; otherwise pull back to the initial trust
  double heading_jitter = 0.5;  // rad, random walk
  double turn_left = 0.2, turn_right = 0.2, turn_back = 0.1;  // pedestrian, at intersections
  double min_spacing = 1;      // m between initial positions
  double corner_fraction = 0.25;  // corner scenario: share of width and depth
  std::optional<double> perception_radius;  // default two block pitches

  static std::map<std::string, double> default_location_influence();
  void validate() const;
  static SimParams from_json(const std::string& text);
  std::string to_json() const;
};

struct Agent {
  int aid = 0;
  std::int64_t breed = 0;
  city::Vec3 position;
  double heading = 0;  // rad in the x-z plane
  double trust = 0.5;
  double baseline = 0.5;
  Leader leader = Leader::None;
  // Pedestrians travel between road intersections.
  int node_col = 0, node_row = 0;
  int dir = 0;          // 0 +x, 1 +z, 2 -x, 3 -z
  double along = 0;     // m from the last node
  int side = 1;         // lane side of the centreline
};

struct DiceStats {
  std::uint64_t draws = 0;
  std::uint64_t accepted = 0;
  double sum = 0, sum_sq = 0;

  double mean() const { return draws ? sum / static_cast<double>(draws) : 0; }
  double variance() const;
  double acceptance() const { return draws ? static_cast<double>(accepted) / static_cast<double>(draws) : 0; }
};

class Simulation {
 public:
  // Throws Validation for bad parameters or more agents than the start
  // region holds at the minimum spacing.
  Simulation(const SimParams& params, const city::CityLayout& layout);

  void step();
  // Doctrine per block; empty while the block has never been enabled.
  std::map<std::int64_t, std::optional<std::int64_t>> doctrine_map() const;
  // Blocks per doctrine column: index 0 counts blocks without a doctrine,
  // then one column per layout doctrine in order.
  std::vector<int> distribution() const;
  double happiness(const Agent& a) const;
  // One roll of the infection dice, recorded in the statistics.
  bool roll();
  double trust_update(const Agent& a, const std::vector<const Agent*>& neighbours,
                      const std::string* block_kind) const;

  const std::vector<Agent>& agents() const { return agents_; }
  const DiceStats& dice() const { return dice_; }
  int steps() const { return steps_; }
  const city::CityState& city() const { return city_; }
  const std::string& kind_of(std::int64_t sid) const { return kinds_.at(sid); }
  const SimParams& params() const { return params_; }

 private:
  void move(Agent& a);
  void move_pedestrian(Agent& a);
  void place();
  city::Vec3 lane_position(const Agent& a) const;

  SimParams params_;
  const city::CityLayout* layout_;
  city::CityState city_;
  std::map<std::int64_t, std::string> kinds_;
  std::vector<Agent> agents_;
  std::mt19937_64 rng_;
  DiceStats dice_;
  int steps_ = 0;
  double perception_ = 0;
};

struct SimOutputs {
  std::optional<int> converged_at;  // step of the last change, once stable for a full window
  int steps = 0;
  std::vector<std::vector<int>> distribution;  // per step, step 0 first
  std::map<std::int64_t, std::optional<std::int64_t>> final_map;
  std::map<std::int64_t, std::string> kinds;  // after institution relabelling
  DiceStats dice;
  std::vector<double> happiness;           // per agent, at the end
  std::vector<int> happiness_histogram;    // 10 bins over [0, 1]
  std::vector<std::vector<double>> trust;  // per step, per agent; only with leaders
};

SimOutputs run(const SimParams& params, const city::CityLayout& layout);

// Writes distribution.tsv, final_map.tsv, happiness.tsv, dice.tsv,
// trust.tsv (with leaders) and manifest.json into `dir`.
void write_outputs(const SimOutputs& out, const SimParams& params, const city::CityLayout& layout,
                   const std::string& dir);

// Independent runs on a thread pool; results in input order.
std::vector<SimOutputs> sweep(const std::vector<SimParams>& runs, const city::CityLayout& layout,
                              unsigned threads = 0);

}  // namespace epolis::sim
