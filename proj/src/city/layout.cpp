#include "epolis/city/layout.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "epolis/error.hpp"

namespace epolis::city {

using nlohmann::json;

std::string_view to_string(SizeClass s) {
  switch (s) {
    case SizeClass::Single: return "single";
    case SizeClass::Double: return "double";
    case SizeClass::Quadruple: return "quadruple";
  }
  return "?";
}

namespace {

SizeClass size_from_string(const std::string& s) {
  if (s == "single") return SizeClass::Single;
  if (s == "double") return SizeClass::Double;
  if (s == "quadruple") return SizeClass::Quadruple;
  throw Error(ErrorCode::Validation, "unknown size class " + s);
}

void fail(const std::string& what) { throw Error(ErrorCode::Validation, what); }

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 vec_from(const json& j) { return Vec3{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json box_json(const Box& b) { return {{"rid", b.rid}, {"centre", vec_json(b.centre)}, {"half", vec_json(b.half)}}; }
Box box_from(const json& j) {
  return Box{j.at("rid").get<std::int64_t>(), vec_from(j.at("centre")), vec_from(j.at("half"))};
}

json composite_json(const Composite& c) {
  json levels = json::array();
  for (const auto& b : c.levels) levels.push_back(box_json(b));
  return levels;
}
Composite composite_from(const json& j) {
  Composite c;
  for (const auto& b : j) c.levels.push_back(box_from(b));
  c.validate();
  return c;
}

// Two nested boxes: the road strip and its paved slab, both flat.
Composite road(std::int64_t rid, Vec3 centre, double hx, double hz) {
  double hy = 0.05 * std::min(hx, hz);
  Box outer{rid, centre, {hx, hy, hz}};
  Box inner{rid, centre, {hx * 0.9, hy * 0.5, hz * 0.9}};
  return Composite{{outer, inner}};
}

}  // namespace

// ------------------------------------------------------------- parameters --

void LayoutParams::validate() const {
  if (!(block_area > 0)) fail("block area must be positive");
  if (road_width < 0) fail("negative road width would make blocks overlap");
  if (!(density > 0 && density <= 1)) fail("density must lie in (0, 1]");
  if (height_min < 0 || height_max < height_min) fail("height range must satisfy 0 <= min <= max");
  if (rows < 1 || cols < 1) fail("the grid needs at least one row and one column");
  if (dilemmas < 0 || dilemmas > rows * cols) fail("more dilemmas than blocks");
  if (double_blocks < 0 || quadruple_blocks < 0 || double_blocks + quadruple_blocks > rows * cols)
    fail("more enlarged blocks than blocks");
}

std::string LayoutParams::to_json() const {
  json j = {{"block_area", block_area}, {"road_width", road_width}, {"density", density},
            {"height_min", height_min}, {"height_max", height_max}, {"rows", rows},
            {"cols", cols}, {"dilemmas", dilemmas}, {"double_blocks", double_blocks},
            {"quadruple_blocks", quadruple_blocks}, {"seed", seed}};
  return j.dump(2);
}

LayoutParams LayoutParams::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("layout config is not JSON: ") + e.what());
  }
  if (!j.is_object()) fail("layout config must be an object");
  LayoutParams p;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "block_area") p.block_area = v.get<double>();
      else if (key == "road_width") p.road_width = v.get<double>();
      else if (key == "density") p.density = v.get<double>();
      else if (key == "height_min") p.height_min = v.get<double>();
      else if (key == "height_max") p.height_max = v.get<double>();
      else if (key == "rows") p.rows = v.get<int>();
      else if (key == "cols") p.cols = v.get<int>();
      else if (key == "dilemmas") p.dilemmas = v.get<int>();
      else if (key == "double_blocks") p.double_blocks = v.get<int>();
      else if (key == "quadruple_blocks") p.quadruple_blocks = v.get<int>();
      else if (key == "seed") p.seed = v.get<std::uint64_t>();
      else fail("unknown layout parameter " + key);
    }
  } catch (const json::exception& e) {
    fail(std::string("bad layout parameter: ") + e.what());
  }
  p.validate();
  return p;
}

// ------------------------------------------------------------------ parts --

const Dilemma::Choice* Dilemma::choice(std::int64_t cid) const {
  for (const auto& c : choices)
    if (c.cid == cid) return &c;
  return nullptr;
}

std::int64_t SmartSpatialType::siid_for(std::int64_t pid) const {
  for (const auto& i : instances)
    if (i.pid == pid) return i.siid;
  throw Error(ErrorCode::UnknownId, "block " + std::to_string(sid) + " has no instance for doctrine " +
                                        std::to_string(pid));
}

const SmartSpatialType& CityLayout::block(std::int64_t sid) const {
  if (sid < 1 || sid > static_cast<std::int64_t>(blocks_.size()))
    throw Error(ErrorCode::UnknownId, "unknown sid " + std::to_string(sid));
  return blocks_[sid - 1];
}

const Dilemma& CityLayout::dilemma(std::int64_t did) const {
  if (did < 1 || did > static_cast<std::int64_t>(dilemmas_.size()))
    throw Error(ErrorCode::UnknownId, "unknown did " + std::to_string(did));
  return dilemmas_[did - 1];
}

const SmartSpatialType* CityLayout::block_at(const Vec3& p) const {
  for (const auto& b : blocks_)
    if (b.composite.outer().contains(p)) return &b;
  return nullptr;
}

Vec3 CityLayout::road_point(int row_gap, double along) const {
  row_gap = std::clamp(row_gap, 0, static_cast<int>(row_edges_.size()) - 1);
  return Vec3{std::clamp(along, 0.0, width_), 0, row_edges_[row_gap]};
}

// -------------------------------------------------------------- generator --

CityLayout CityLayout::generate(const LayoutParams& params, const Catalogs& catalogs) {
  params.validate();
  catalogs.validate();
  if (static_cast<std::size_t>(params.dilemmas) > catalogs.dilemmas.size())
    fail("the dilemma catalog holds only " + std::to_string(catalogs.dilemmas.size()) + " dilemmas");
  if (catalogs.kinds.empty()) fail("the spatial kind catalog is empty");

  CityLayout L;
  L.params_ = params;
  L.doctrines_ = catalogs.doctrines;
  L.default_pid_ = catalogs.doctrines.front().pid;
  for (const auto& d : catalogs.doctrines)
    if (d.name == "Apoliticism") L.default_pid_ = d.pid;

  std::mt19937_64 rng(params.seed);
  const int n = params.rows * params.cols;
  auto pick = [&](std::size_t size) { return std::uniform_int_distribution<std::size_t>(0, size - 1)(rng); };
  auto permutation = [&] {
    std::vector<int> idx(n);
    for (int k = 0; k < n; ++k) idx[k] = k;
    for (int k = n - 1; k > 0; --k) std::swap(idx[k], idx[pick(k + 1)]);
    return idx;
  };

  std::vector<SizeClass> sizes(n, SizeClass::Single);
  auto order = permutation();
  for (int k = 0; k < params.double_blocks; ++k) sizes[order[k]] = SizeClass::Double;
  for (int k = 0; k < params.quadruple_blocks; ++k) sizes[order[params.double_blocks + k]] = SizeClass::Quadruple;

  const double half = std::sqrt(params.block_area) / 2;
  auto extent = [&](SizeClass s) {
    // Double doubles the x side, Quadruple both sides: 2x and 4x the area.
    return std::pair<double, double>{s == SizeClass::Single ? half : 2 * half,
                                     s == SizeClass::Quadruple ? 2 * half : half};
  };
  std::vector<double> colw(params.cols, 0), rowd(params.rows, 0);
  for (int k = 0; k < n; ++k) {
    auto [hx, hz] = extent(sizes[k]);
    colw[k % params.cols] = std::max(colw[k % params.cols], 2 * hx);
    rowd[k / params.cols] = std::max(rowd[k / params.cols], 2 * hz);
  }
  const double road_w = params.road_width;
  std::vector<double> col_x(params.cols), row_z(params.rows);
  auto& col_edges = L.col_edges_;
  double x = road_w;
  col_edges.push_back(road_w / 2);
  for (int c = 0; c < params.cols; ++c) {
    col_x[c] = x + colw[c] / 2;
    x += colw[c] + road_w;
    col_edges.push_back(x - road_w / 2);
  }
  double z = road_w;
  L.row_edges_.push_back(road_w / 2);
  for (int r = 0; r < params.rows; ++r) {
    row_z[r] = z + rowd[r] / 2;
    z += rowd[r] + road_w;
    L.row_edges_.push_back(z - road_w / 2);
  }
  L.width_ = x;
  L.depth_ = z;

  const double shrink = std::sqrt(params.density);
  const int hoods_per_row = (params.cols + 2) / 3;
  for (int k = 0; k < n; ++k) {
    SmartSpatialType b;
    b.sid = k + 1;
    b.row = k / params.cols;
    b.col = k % params.cols;
    b.neighbourhood = (b.row / 2) * hoods_per_row + b.col / 3;
    b.size = sizes[k];
    b.kind = catalogs.kinds[pick(catalogs.kinds.size())];
    b.height = std::uniform_real_distribution<double>(params.height_min, params.height_max)(rng);
    auto [hx, hz] = extent(b.size);
    Vec3 centre{col_x[b.col], 0, row_z[b.row]};
    // A sidewalk of at least half a metre keeps the footprint strictly inside.
    Box outer{100 * b.sid + 1, centre, {hx, 100, hz}};
    Box inner{100 * b.sid + 2, centre, {std::min(hx * shrink, hx - 0.5), 90, std::min(hz * shrink, hz - 0.5)}};
    b.composite = Composite{{outer, inner}};
    b.composite.validate();
    for (std::size_t d = 0; d < catalogs.doctrines.size(); ++d)
      b.instances.push_back(
          Instance{(b.sid - 1) * static_cast<std::int64_t>(catalogs.doctrines.size()) + static_cast<std::int64_t>(d) + 1,
                   catalogs.doctrines[d].pid});
    L.centres_["sst:" + std::to_string(b.sid)] = centre;
    L.blocks_.push_back(std::move(b));
  }

  auto chosen = permutation();
  chosen.resize(params.dilemmas);
  std::sort(chosen.begin(), chosen.end());
  std::vector<bool> has_dilemma(n, false);
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    const DilemmaSpec& spec = catalogs.dilemmas[k];
    Dilemma d;
    d.did = static_cast<std::int64_t>(k) + 1;
    d.sid = chosen[k] + 1;
    d.key = spec.key;
    d.title = spec.title;
    d.body = spec.body;
    d.media = spec.media;
    for (std::size_t c = 0; c < spec.choices.size(); ++c)
      d.choices.push_back({(d.did - 1) * 5 + static_cast<std::int64_t>(c) + 1, spec.choices[c].text,
                           spec.choices[c].pid});
    // The dilemma scene: a row of rooms south of the city.
    d.location = Box{10000 + d.did, {20.0 * static_cast<double>(d.did), 0, -100}, {5, 5, 5}};
    L.centres_["dilemma:" + std::to_string(d.did)] = d.location.centre;
    L.blocks_[chosen[k]].did = d.did;
    has_dilemma[chosen[k]] = true;
    L.dilemmas_.push_back(std::move(d));
  }
  for (int k = 0; k < n; ++k)
    if (!has_dilemma[k]) L.blocks_[k].permanent_pid = catalogs.doctrines[pick(catalogs.doctrines.size())].pid;

  std::int64_t rid = 20000;
  if (road_w > 0) {
    for (double rz : L.row_edges_) L.roads_.push_back({++rid, road(rid, {x / 2, 0, rz}, x / 2, road_w / 2)});
    for (double cx : col_edges) L.roads_.push_back({++rid, road(rid, {cx, 0, z / 2}, road_w / 2, z / 2)});
  }
  return L;
}

// ------------------------------------------------------------------ facts --

std::vector<lang::FactLiteral> CityLayout::static_facts() const {
  using lang::sym;
  using lang::Value;
  auto i = [](std::int64_t v) { return Value{v}; };
  std::vector<lang::FactLiteral> out;
  for (const auto& d : doctrines_) out.push_back({"L_PoliticalDogma", {i(d.pid), sym(d.name)}});
  for (const auto& b : blocks_) {
    const Box& o = b.composite.outer();
    const Box& in = b.composite.inner();
    out.push_back({"L_SpatialType", {i(b.sid), sym(b.kind)}});
    out.push_back({"L_AtomicLocation", {i(o.rid), i(b.sid), i(o.rid)}});
    out.push_back({"L_AtomicLocation", {i(in.rid), i(b.sid), i(in.rid)}});
    out.push_back({"L_NestedLocation", {i(in.rid), i(o.rid), i(b.sid), i(in.rid)}});
    for (const auto& inst : b.instances)
      out.push_back({"L_PoliticisedSpatialType", {i(inst.siid), i(b.sid), i(inst.pid)}});
  }
  for (const auto& d : dilemmas_) {
    out.push_back({"L_Dilemma", {i(d.did), i(d.sid)}});
    out.push_back({"L_AtomicLocation", {i(d.location.rid), i(0), i(d.location.rid)}});
    for (const auto& c : d.choices) out.push_back({"L_PoliticisedUserChoice", {i(c.cid), i(c.pid)}});
  }
  return out;
}

// ------------------------------------------------------------------- json --

std::string CityLayout::to_json() const {
  json blocks = json::array(), roads = json::array(), dilemmas = json::array(), doctrines = json::array();
  for (const auto& d : doctrines_) doctrines.push_back({{"pid", d.pid}, {"name", d.name}});
  for (const auto& b : blocks_) {
    json inst = json::array();
    for (const auto& s : b.instances) inst.push_back({{"siid", s.siid}, {"pid", s.pid}});
    json jb = {{"sid", b.sid}, {"row", b.row}, {"col", b.col}, {"neighbourhood", b.neighbourhood},
               {"kind", b.kind}, {"size", std::string(to_string(b.size))}, {"height", b.height},
               {"zones", composite_json(b.composite)}, {"instances", inst}};
    if (b.did) jb["did"] = *b.did;
    if (b.permanent_pid) jb["permanent_pid"] = *b.permanent_pid;
    blocks.push_back(std::move(jb));
  }
  for (const auto& r : roads_) roads.push_back({{"rid", r.rid}, {"zones", composite_json(r.composite)}});
  for (const auto& d : dilemmas_) {
    json choices = json::array();
    for (const auto& c : d.choices) choices.push_back({{"cid", c.cid}, {"text", c.text}, {"pid", c.pid}});
    dilemmas.push_back({{"did", d.did}, {"sid", d.sid}, {"key", d.key}, {"title", d.title}, {"body", d.body},
                        {"media", d.media}, {"choices", choices}, {"location", box_json(d.location)}});
  }
  json centres = json::object();
  for (const auto& [k, v] : centres_) centres[k] = vec_json(v);
  json j = {{"format", 1},
            {"params", json::parse(params_.to_json())},
            {"default_pid", default_pid_},
            {"extent", {{"width", width_}, {"depth", depth_}, {"col_edges", col_edges_}, {"row_edges", row_edges_}}},
            {"doctrines", doctrines},
            {"blocks", blocks},
            {"roads", roads},
            {"dilemmas", dilemmas},
            {"centres", centres}};
  return j.dump(1) + "\n";
}

CityLayout CityLayout::from_json(const std::string& text) {
  CityLayout L;
  try {
    json j = json::parse(text);
    if (j.at("format").get<int>() != 1) fail("unsupported layout format");
    L.params_ = LayoutParams::from_json(j.at("params").dump());
    L.default_pid_ = j.at("default_pid").get<std::int64_t>();
    L.width_ = j.at("extent").at("width").get<double>();
    L.depth_ = j.at("extent").at("depth").get<double>();
    L.col_edges_ = j.at("extent").at("col_edges").get<std::vector<double>>();
    L.row_edges_ = j.at("extent").at("row_edges").get<std::vector<double>>();
    for (const auto& d : j.at("doctrines"))
      L.doctrines_.push_back({d.at("pid").get<std::int64_t>(), d.at("name").get<std::string>()});
    for (const auto& jb : j.at("blocks")) {
      SmartSpatialType b;
      b.sid = jb.at("sid").get<std::int64_t>();
      b.row = jb.at("row").get<int>();
      b.col = jb.at("col").get<int>();
      b.neighbourhood = jb.at("neighbourhood").get<int>();
      b.kind = jb.at("kind").get<std::string>();
      b.size = size_from_string(jb.at("size").get<std::string>());
      b.height = jb.at("height").get<double>();
      b.composite = composite_from(jb.at("zones"));
      for (const auto& s : jb.at("instances"))
        b.instances.push_back({s.at("siid").get<std::int64_t>(), s.at("pid").get<std::int64_t>()});
      if (jb.contains("did")) b.did = jb.at("did").get<std::int64_t>();
      if (jb.contains("permanent_pid")) b.permanent_pid = jb.at("permanent_pid").get<std::int64_t>();
      if (b.sid != static_cast<std::int64_t>(L.blocks_.size()) + 1) fail("blocks must be numbered 1..n in order");
      L.blocks_.push_back(std::move(b));
    }
    for (const auto& jr : j.at("roads")) L.roads_.push_back({jr.at("rid").get<std::int64_t>(), composite_from(jr.at("zones"))});
    for (const auto& jd : j.at("dilemmas")) {
      Dilemma d;
      d.did = jd.at("did").get<std::int64_t>();
      d.sid = jd.at("sid").get<std::int64_t>();
      d.key = jd.at("key").get<std::string>();
      d.title = jd.at("title").get<std::string>();
      d.body = jd.at("body").get<std::string>();
      d.media = jd.at("media").get<std::string>();
      for (const auto& c : jd.at("choices"))
        d.choices.push_back({c.at("cid").get<std::int64_t>(), c.at("text").get<std::string>(), c.at("pid").get<std::int64_t>()});
      d.location = box_from(jd.at("location"));
      if (d.did != static_cast<std::int64_t>(L.dilemmas_.size()) + 1) fail("dilemmas must be numbered 1..n in order");
      L.dilemmas_.push_back(std::move(d));
    }
    for (const auto& [k, v] : j.at("centres").items()) L.centres_[k] = vec_from(v);
  } catch (const json::exception& e) {
    fail(std::string("malformed layout: ") + e.what());
  }
  return L;
}

}  // namespace epolis::city
