#include "epolis/city/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "epolis/error.hpp"

namespace epolis::city {

bool Box::contains(const Vec3& p) const {
  return std::abs(p.x - centre.x) <= half.x && std::abs(p.y - centre.y) <= half.y &&
         std::abs(p.z - centre.z) <= half.z;
}

bool Box::strictly_contains(const Box& o) const {
  auto inside = [](double c, double h, double oc, double oh) { return oc - oh > c - h && oc + oh < c + h; };
  return inside(centre.x, half.x, o.centre.x, o.half.x) && inside(centre.y, half.y, o.centre.y, o.half.y) &&
         inside(centre.z, half.z, o.centre.z, o.half.z);
}

double Box::xz_overlap(const Box& o) const {
  auto span = [](double c1, double h1, double c2, double h2) {
    return std::max(0.0, std::min(c1 + h1, c2 + h2) - std::max(c1 - h1, c2 - h2));
  };
  return span(centre.x, half.x, o.centre.x, o.half.x) * span(centre.z, half.z, o.centre.z, o.half.z);
}

bool Sphere::contains(const Vec3& p) const {
  double dx = p.x - centre.x, dy = p.y - centre.y, dz = p.z - centre.z;
  return dx * dx + dy * dy + dz * dz <= radius * radius;
}

void Composite::validate() const {
  if (levels.size() < 2) throw Error(ErrorCode::Validation, "composite location needs at least two levels");
  for (const auto& b : levels)
    if (b.half.x <= 0 || b.half.y <= 0 || b.half.z <= 0)
      throw Error(ErrorCode::Validation, "half-extents must be positive");
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (!(levels[i].centre == levels[0].centre))
      throw Error(ErrorCode::Validation, "nested locations must share one centre");
    if (!levels[i - 1].strictly_contains(levels[i]))
      throw Error(ErrorCode::Validation, "each level must lie strictly inside the previous one");
  }
}

ZoneHit zone_of(const Composite& c, const Vec3& p) {
  if (c.inner().contains(p)) return ZoneHit::Inner;
  if (c.outer().contains(p)) return ZoneHit::OuterOnly;
  return ZoneHit::None;
}

}  // namespace epolis::city
