#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "epolis/error.hpp"
#include "epolis/sim/sim.hpp"

namespace epolis::sim {

using nlohmann::json;

namespace {

void fail(const std::string& what) { throw Error(ErrorCode::Validation, what); }

bool probability(double p) { return p >= 0 && p <= 1; }

}  // namespace

// Places that lower trust (work, schooling, authority) and places that raise
// it (leisure, heritage, green space), from the standard kind catalog.
std::map<std::string, double> SimParams::default_location_influence() {
  return {{"Factory", -0.01},      {"Office building", -0.01}, {"Government building", -0.01},
          {"Police station", -0.01}, {"School", -0.01},        {"University", -0.01},
          {"Park", 0.01},          {"Archaeological site", 0.01}, {"Agora", 0.01},
          {"Theatre", 0.01},       {"Cinema", 0.01},           {"Temple", 0.01},
          {"Urban void", 0}};
}

void SimParams::validate() const {
  for (const auto& [pid, n] : agents)
    if (n < 0) fail("agent count for doctrine " + std::to_string(pid) + " is negative");
  for (const auto& [kind, n] : institutions)
    if (n < 0) fail("institution count for " + kind + " is negative");
  if (challenges < 0) fail("challenge count is negative");
  if (!probability(dice)) fail("dice must lie in [0, 1]");
  if (positive_leaders < 0 || negative_leaders < 0) fail("leader counts must be non-negative");
  int total = 0;
  for (const auto& [pid, n] : agents) total += n;
  if (positive_leaders + negative_leaders > total) fail("more leaders than agents");
  if (interaction_radius < 0 || step_length < 0) fail("radius and step length must be non-negative");
  if (max_steps < 0 || window < 1) fail("max_steps must be >= 0 and window >= 1");
  if (!probability(lambda) || !probability(initial_trust) || !probability(influence_decay))
    fail("lambda, initial_trust and influence_decay must lie in [0, 1]");
  if (!probability(turn_left) || !probability(turn_right) || !probability(turn_back) ||
      turn_left + turn_right + turn_back > 1)
    fail("turn probabilities must lie in [0, 1] and sum to at most 1");
  if (!(min_spacing > 0)) fail("min_spacing must be positive");
  if (!(corner_fraction > 0 && corner_fraction <= 1)) fail("corner_fraction must lie in (0, 1]");
  if (perception_radius && *perception_radius < 0) fail("perception_radius must be non-negative");
  if (heading_jitter < 0) fail("heading_jitter must be non-negative");
}

std::string SimParams::to_json() const {
  json a = json::object(), inst = json::object(), infl = json::object();
  for (const auto& [pid, n] : agents) a[std::to_string(pid)] = n;
  for (const auto& [k, n] : institutions) inst[k] = n;
  for (const auto& [k, d] : location_influence) infl[k] = d;
  json j = {{"agents", a},
            {"institutions", inst},
            {"challenges", challenges},
            {"movement", movement == Movement::RandomWalk ? "random-walk" : "pedestrian"},
            {"scenario", scenario == Scenario::Corner ? "corner" : "scattered"},
            {"dice", dice},
            {"location_influence", infl},
            {"positive_leaders", positive_leaders},
            {"negative_leaders", negative_leaders},
            {"interaction_radius", interaction_radius},
            {"step_length", step_length},
            {"max_steps", max_steps},
            {"window", window},
            {"seed", seed},
            {"lambda", lambda},
            {"initial_trust", initial_trust},
            {"influence_decay", influence_decay},
            {"heading_jitter", heading_jitter},
            {"turn_left", turn_left},
            {"turn_right", turn_right},
            {"turn_back", turn_back},
            {"min_spacing", min_spacing},
            {"corner_fraction", corner_fraction}};
  if (perception_radius) j["perception_radius"] = *perception_radius;
  return j.dump(2);
}

SimParams SimParams::from_json(const std::string& text) {
  SimParams p;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("simulation config is not JSON: ") + e.what());
  }
  if (!j.is_object()) fail("simulation config must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "agents") {
        p.agents.clear();
        for (const auto& [pid, n] : v.items()) p.agents[std::stoll(pid)] = n.get<int>();
      } else if (key == "institutions") {
        for (const auto& [k, n] : v.items()) p.institutions[k] = n.get<int>();
      } else if (key == "location_influence") {
        for (const auto& [k, d] : v.items()) p.location_influence[k] = d.get<double>();
      } else if (key == "movement") {
        auto m = v.get<std::string>();
        if (m == "random-walk") p.movement = Movement::RandomWalk;
        else if (m == "pedestrian") p.movement = Movement::Pedestrian;
        else fail("unknown movement mode " + m);
      } else if (key == "scenario") {
        auto s = v.get<std::string>();
        if (s == "corner") p.scenario = Scenario::Corner;
        else if (s == "scattered") p.scenario = Scenario::Scattered;
        else fail("unknown scenario " + s);
      } else if (key == "challenges") p.challenges = v.get<int>();
      else if (key == "dice") p.dice = v.get<double>();
      else if (key == "positive_leaders") p.positive_leaders = v.get<int>();
      else if (key == "negative_leaders") p.negative_leaders = v.get<int>();
      else if (key == "interaction_radius") p.interaction_radius = v.get<double>();
      else if (key == "step_length") p.step_length = v.get<double>();
      else if (key == "max_steps") p.max_steps = v.get<int>();
      else if (key == "window") p.window = v.get<int>();
      else if (key == "seed") p.seed = v.get<std::uint64_t>();
      else if (key == "lambda") p.lambda = v.get<double>();
      else if (key == "initial_trust") p.initial_trust = v.get<double>();
      else if (key == "influence_decay") p.influence_decay = v.get<double>();
      else if (key == "heading_jitter") p.heading_jitter = v.get<double>();
      else if (key == "turn_left") p.turn_left = v.get<double>();
      else if (key == "turn_right") p.turn_right = v.get<double>();
      else if (key == "turn_back") p.turn_back = v.get<double>();
      else if (key == "min_spacing") p.min_spacing = v.get<double>();
      else if (key == "corner_fraction") p.corner_fraction = v.get<double>();
      else if (key == "perception_radius") p.perception_radius = v.get<double>();
      else fail("unknown simulation parameter " + key);
    }
  } catch (const json::exception& e) {
    fail(std::string("bad simulation parameter: ") + e.what());
  } catch (const std::invalid_argument&) {
    fail("agent keys must be doctrine ids");
  }
  p.validate();
  return p;
}

double DiceStats::variance() const {
  if (draws < 2) return 0;
  double n = static_cast<double>(draws);
  return std::max(0.0, (sum_sq - sum * sum / n) / (n - 1));
}

}  // namespace epolis::sim
