#include <algorithm>
#include <cmath>

#include "epolis/error.hpp"
#include "epolis/sim/sim.hpp"

namespace epolis::sim {

using city::Vec3;

namespace {

constexpr double kTau = 6.283185307179586;
constexpr int kDx[] = {1, 0, -1, 0};
constexpr int kDz[] = {0, 1, 0, -1};

double xz_distance(const Vec3& a, const Vec3& b) { return std::hypot(a.x - b.x, a.z - b.z); }

}  // namespace

Simulation::Simulation(const SimParams& params, const city::CityLayout& layout)
    : params_(params), layout_(&layout), city_(layout), rng_(params.seed) {
  params_.validate();
  for (const auto& [pid, n] : params_.agents) {
    bool known = false;
    for (const auto& d : layout.doctrines()) known |= d.pid == pid;
    if (!known && n > 0) throw Error(ErrorCode::Validation, "breed " + std::to_string(pid) + " is not a doctrine");
  }
  for (const auto& b : layout.blocks()) kinds_[b.sid] = b.kind;
  int relabel = 0;
  for (const auto& [kind, n] : params_.institutions) relabel += n;
  if (relabel > static_cast<int>(layout.blocks().size()))
    throw Error(ErrorCode::Validation, "more institutions than blocks");
  if (relabel > 0) {
    std::vector<std::int64_t> sids;
    for (const auto& b : layout.blocks()) sids.push_back(b.sid);
    std::shuffle(sids.begin(), sids.end(), rng_);
    std::size_t next = 0;
    for (const auto& [kind, n] : params_.institutions)
      for (int k = 0; k < n; ++k) kinds_[sids[next++]] = kind;
  }
  double pitch = std::sqrt(layout.params().block_area) + layout.params().road_width;
  perception_ = params_.perception_radius.value_or(2 * pitch);
  place();
}

void Simulation::place() {
  int total = 0;
  for (const auto& [pid, n] : params_.agents) total += n;
  double w = layout_->width(), d = layout_->depth();
  if (params_.scenario == Scenario::Corner) {
    w *= params_.corner_fraction;
    d *= params_.corner_fraction;
  }
  // Candidate starts on a grid at the minimum spacing; distinct cells keep
  // agents at least that far apart.
  auto nx = static_cast<std::int64_t>(std::floor(w / params_.min_spacing)) + 1;
  auto nz = static_cast<std::int64_t>(std::floor(d / params_.min_spacing)) + 1;
  if (total > nx * nz)
    throw Error(ErrorCode::Validation, std::to_string(total) + " agents do not fit the start region, which holds " +
                                           std::to_string(nx * nz) + " at the minimum spacing");
  std::vector<std::int64_t> cells(static_cast<std::size_t>(nx * nz));
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<std::int64_t>(i);
  for (int i = 0; i < total; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
    std::swap(cells[i], cells[pick(rng_)]);
  }
  std::uniform_real_distribution<double> angle(0, kTau);
  int aid = 0;
  for (const auto& [pid, n] : params_.agents) {
    for (int k = 0; k < n; ++k) {
      Agent a;
      a.aid = ++aid;
      a.breed = pid;
      std::int64_t c = cells[a.aid - 1];
      a.position = Vec3{static_cast<double>(c % nx) * params_.min_spacing, 0,
                        static_cast<double>(c / nx) * params_.min_spacing};
      a.heading = angle(rng_);
      a.trust = a.baseline = params_.initial_trust;
      agents_.push_back(a);
    }
  }
  std::vector<std::size_t> order(agents_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng_);
  for (int k = 0; k < params_.positive_leaders + params_.negative_leaders; ++k) {
    Agent& a = agents_[order[k]];
    a.leader = k < params_.positive_leaders ? Leader::Positive : Leader::Negative;
    a.trust = a.baseline = a.leader == Leader::Positive ? 1.0 : 0.0;
  }
  if (params_.movement == Movement::Pedestrian) {
    const auto& cols = layout_->col_edges();
    const auto& rows = layout_->row_edges();
    auto nearest = [](const std::vector<double>& edges, double v) {
      int best = 0;
      for (int i = 1; i < static_cast<int>(edges.size()); ++i)
        if (std::abs(edges[i] - v) < std::abs(edges[best] - v)) best = i;
      return best;
    };
    for (Agent& a : agents_) {
      a.node_col = nearest(cols, a.position.x);
      a.node_row = nearest(rows, a.position.z);
      a.dir = static_cast<int>(rng_() % 4);
      a.side = rng_() % 2 ? 1 : -1;
      int nc = a.node_col + kDx[a.dir], nr = a.node_row + kDz[a.dir];
      if (nc < 0 || nc >= static_cast<int>(cols.size()) || nr < 0 || nr >= static_cast<int>(rows.size()))
        a.dir = (a.dir + 2) % 4;
      a.position = lane_position(a);
    }
  }
}

Vec3 Simulation::lane_position(const Agent& a) const {
  // Pedestrians keep to the edge of the road, inside the blocks' outer zones.
  double offset = layout_->params().road_width / 2 + 0.25;
  double x = layout_->col_edges()[a.node_col] + a.along * kDx[a.dir] - a.side * offset * kDz[a.dir];
  double z = layout_->row_edges()[a.node_row] + a.along * kDz[a.dir] + a.side * offset * kDx[a.dir];
  return Vec3{x, 0, z};
}

void Simulation::move_pedestrian(Agent& a) {
  const auto& cols = layout_->col_edges();
  const auto& rows = layout_->row_edges();
  auto valid = [&](int c, int r, int dir) {
    int nc = c + kDx[dir], nr = r + kDz[dir];
    return nc >= 0 && nc < static_cast<int>(cols.size()) && nr >= 0 && nr < static_cast<int>(rows.size());
  };
  auto length = [&](const Agent& g) {
    return kDx[g.dir] ? std::abs(cols[g.node_col + kDx[g.dir]] - cols[g.node_col])
                      : std::abs(rows[g.node_row + kDz[g.dir]] - rows[g.node_row]);
  };
  if (!valid(a.node_col, a.node_row, a.dir)) {
    a.position = lane_position(a);
    return;  // a one-node grid
  }
  a.along += params_.step_length;
  while (a.along >= length(a)) {
    a.along -= length(a);
    a.node_col += kDx[a.dir];
    a.node_row += kDz[a.dir];
    std::uniform_real_distribution<double> u(0, 1);
    double roll = u(rng_);
    int turn = roll < params_.turn_left                                             ? 1
               : roll < params_.turn_left + params_.turn_right                      ? 3
               : roll < params_.turn_left + params_.turn_right + params_.turn_back ? 2
                                                                                    : 0;
    int dir = (a.dir + turn) % 4;
    if (!valid(a.node_col, a.node_row, dir)) {
      std::vector<int> options;
      for (int d = 0; d < 4; ++d)
        if (valid(a.node_col, a.node_row, d)) options.push_back(d);
      dir = options[rng_() % options.size()];
    }
    a.dir = dir;
  }
  a.position = lane_position(a);
}

void Simulation::move(Agent& a) {
  if (params_.movement == Movement::Pedestrian) return move_pedestrian(a);
  std::uniform_real_distribution<double> jitter(-params_.heading_jitter, params_.heading_jitter);
  a.heading = std::fmod(a.heading + jitter(rng_) + kTau, kTau);
  double x = a.position.x + params_.step_length * std::cos(a.heading);
  double z = a.position.z + params_.step_length * std::sin(a.heading);
  double w = layout_->width(), d = layout_->depth();
  if (x < 0 || x > w) {
    x = x < 0 ? -x : 2 * w - x;
    a.heading = std::fmod(3 * kTau / 2 - a.heading, kTau);
  }
  if (z < 0 || z > d) {
    z = z < 0 ? -z : 2 * d - z;
    a.heading = std::fmod(kTau - a.heading, kTau);
  }
  a.position = Vec3{std::clamp(x, 0.0, w), 0, std::clamp(z, 0.0, d)};
}

bool Simulation::roll() {
  double u = std::uniform_real_distribution<double>(0, 1)(rng_);
  ++dice_.draws;
  dice_.sum += u;
  dice_.sum_sq += u * u;
  bool hit = u < params_.dice;
  dice_.accepted += hit;
  return hit;
}

double Simulation::trust_update(const Agent& a, const std::vector<const Agent*>& neighbours,
                                const std::string* block_kind) const {
  double t = a.trust, delta = 0;
  for (const Agent* n : neighbours) {
    if (n->leader == Leader::Positive) delta += params_.lambda * (1 - t);
    if (n->leader == Leader::Negative) delta -= params_.lambda * t;
  }
  if (block_kind) {
    auto it = params_.location_influence.find(*block_kind);
    if (it != params_.location_influence.end()) delta += it->second;
  }
  double next = t + delta;
  next += params_.influence_decay * (a.baseline - next);
  return std::clamp(next, 0.0, 1.0);
}

void Simulation::step() {
  for (Agent& a : agents_) move(a);
  std::vector<const std::string*> kinds(agents_.size(), nullptr);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const Agent& a = agents_[i];
    if (const auto* b = layout_->block_at(a.position)) {
      kinds[i] = &kinds_.at(b->sid);
      if (roll()) city_.set_doctrine(b->sid, a.breed);
    }
  }
  std::vector<double> next(agents_.size());
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const Agent& a = agents_[i];
    if (a.leader != Leader::None) {
      next[i] = a.trust;
      continue;
    }
    std::vector<const Agent*> near;
    for (const Agent& n : agents_)
      if (&n != &a && n.leader != Leader::None && xz_distance(n.position, a.position) <= params_.interaction_radius)
        near.push_back(&n);
    next[i] = trust_update(a, near, kinds[i]);
  }
  for (std::size_t i = 0; i < agents_.size(); ++i) agents_[i].trust = next[i];
  ++steps_;
}

std::map<std::int64_t, std::optional<std::int64_t>> Simulation::doctrine_map() const {
  std::map<std::int64_t, std::optional<std::int64_t>> out;
  for (const auto& [sid, st] : city_.states()) out[sid] = st.enabled_pid;
  return out;
}

std::vector<int> Simulation::distribution() const {
  const auto& docs = layout_->doctrines();
  std::vector<int> out(docs.size() + 1, 0);
  for (const auto& [sid, st] : city_.states()) {
    if (!st.enabled_pid) {
      ++out[0];
      continue;
    }
    for (std::size_t i = 0; i < docs.size(); ++i)
      if (docs[i].pid == *st.enabled_pid) ++out[i + 1];
  }
  return out;
}

double Simulation::happiness(const Agent& a) const {
  int seen = 0, match = 0;
  for (const auto& b : layout_->blocks()) {
    if (xz_distance(b.composite.outer().centre, a.position) > perception_) continue;
    ++seen;
    match += city_.state(b.sid).enabled_pid == a.breed;
  }
  return seen ? static_cast<double>(match) / seen : 0.5;
}

}  // namespace epolis::sim
