#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epolis/city/catalog.hpp"
#include "epolis/city/geometry.hpp"
#include "epolis/lang/ast.hpp"

namespace epolis::city {

enum class SizeClass { Single, Double, Quadruple };
std::string_view to_string(SizeClass s);

struct LayoutParams {
  double block_area = 1600;  // m², Single outer footprint
  double road_width = 8;     // m
  double density = 0.36;     // inner footprint / outer footprint
  double height_min = 10;    // m, rendering only
  double height_max = 40;
  int rows = 6;
  int cols = 6;
  int dilemmas = 20;
  int double_blocks = 0;
  int quadruple_blocks = 0;
  std::uint64_t seed = 1;

  void validate() const;
  static LayoutParams from_json(const std::string& text);
  std::string to_json() const;
};

struct Instance {
  std::int64_t siid = 0;
  std::int64_t pid = 0;
};

struct Dilemma {
  std::int64_t did = 0;
  std::int64_t sid = 0;
  std::string key;
  std::string title;
  std::string body;
  std::string media;
  struct Choice {
    std::int64_t cid = 0;  // city-wide: (did - 1) * 5 + k
    std::string text;
    std::int64_t pid = 0;
  };
  std::vector<Choice> choices;
  Box location;  // off-grid, disjoint from every block

  const Choice* choice(std::int64_t cid) const;
};

struct SmartSpatialType {
  std::int64_t sid = 0;
  int row = 0, col = 0;
  int neighbourhood = 0;  // 2x3 groups of blocks
  std::string kind;
  SizeClass size = SizeClass::Single;
  Composite composite;  // outer = block, inner = building footprint
  double height = 0;
  std::vector<Instance> instances;  // one per doctrine
  std::optional<std::int64_t> did;
  std::optional<std::int64_t> permanent_pid;  // blocks without a dilemma

  std::int64_t siid_for(std::int64_t pid) const;
};

struct RoadBlock {
  std::int64_t rid = 0;
  Composite composite;
};

class CityLayout {
 public:
  // Throws Validation for infeasible parameters or catalogs too small for them.
  static CityLayout generate(const LayoutParams& params, const Catalogs& catalogs = Catalogs::standard());
  static CityLayout from_json(const std::string& text);
  std::string to_json() const;

  const LayoutParams& params() const { return params_; }
  const std::vector<SmartSpatialType>& blocks() const { return blocks_; }
  const std::vector<RoadBlock>& roads() const { return roads_; }
  const std::vector<Dilemma>& dilemmas() const { return dilemmas_; }
  const std::vector<Doctrine>& doctrines() const { return doctrines_; }
  const std::map<std::string, Vec3>& centres() const { return centres_; }
  std::int64_t default_pid() const { return default_pid_; }
  // The city spans [0, width] x [0, depth] in x and z.
  double width() const { return width_; }
  double depth() const { return depth_; }
  // Road centrelines: x of each column gap, z of each row gap.
  const std::vector<double>& col_edges() const { return col_edges_; }
  const std::vector<double>& row_edges() const { return row_edges_; }

  const SmartSpatialType& block(std::int64_t sid) const;  // throws UnknownId
  const Dilemma& dilemma(std::int64_t did) const;         // throws UnknownId
  // The block whose outer zone contains `p`, if any.
  const SmartSpatialType* block_at(const Vec3& p) const;
  // A point on the road network, outside every block.
  Vec3 road_point(int row_gap, double along) const;
  // Sensor-layer facts describing the city for a knowledge base.
  std::vector<lang::FactLiteral> static_facts() const;

 private:
  LayoutParams params_;
  std::vector<SmartSpatialType> blocks_;
  std::vector<RoadBlock> roads_;
  std::vector<Dilemma> dilemmas_;
  std::vector<Doctrine> doctrines_;
  std::map<std::string, Vec3> centres_;
  std::int64_t default_pid_ = 0;
  double width_ = 0, depth_ = 0;
  std::vector<double> col_edges_;
  std::vector<double> row_edges_;
};

}  // namespace epolis::city
