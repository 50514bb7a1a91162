#pragma once

#include <cstdint>
#include <vector>

namespace epolis::city {

struct Vec3 {
  double x = 0, y = 0, z = 0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

// Axis-aligned box; the boundary counts as inside.
struct Box {
  std::int64_t rid = 0;
  Vec3 centre;
  Vec3 half;

  bool contains(const Vec3& p) const;
  // Strictly inside on every axis (no shared face).
  bool strictly_contains(const Box& other) const;
  double xz_area() const { return 4 * half.x * half.z; }
  double xz_overlap(const Box& other) const;
};

struct Sphere {
  std::int64_t rid = 0;
  Vec3 centre;
  double radius = 0;

  bool contains(const Vec3& p) const;
};

// Nested boxes sharing one centre, outermost first.
struct Composite {
  std::vector<Box> levels;

  const Box& outer() const { return levels.front(); }
  const Box& inner() const { return levels.back(); }
  // Throws Validation unless there are >= 2 levels, all centred together and
  // each strictly inside the previous one.
  void validate() const;
};

enum class ZoneHit { None, OuterOnly, Inner };

ZoneHit zone_of(const Composite& c, const Vec3& p);

}  // namespace epolis::city
