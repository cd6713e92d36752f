#include "epd/geometry.hpp"

#include <array>
#include <cmath>

namespace epd::geometry {

namespace {

std::array<Vec2, 4> corners(const OrientedRect& r) {
  const Vec2 u = Vec2{std::cos(r.heading), std::sin(r.heading)} * (0.5 * r.length);
  const Vec2 v = Vec2{-std::sin(r.heading), std::cos(r.heading)} * (0.5 * r.width);
  return {r.center + u + v, r.center + u - v, r.center - u - v, r.center - u + v};
}

// Projects both rectangles on the two body axes of `a`; true when the
// intervals are disjoint on either axis.
bool separated_on_axes_of(const OrientedRect& a, const std::array<Vec2, 4>& ca,
                          const std::array<Vec2, 4>& cb) {
  const Vec2 axes[2] = {{std::cos(a.heading), std::sin(a.heading)},
                        {-std::sin(a.heading), std::cos(a.heading)}};
  for (const Vec2& axis : axes) {
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const Vec2& p : ca) {
      const double d = p.dot(axis);
      amin = std::min(amin, d);
      amax = std::max(amax, d);
    }
    for (const Vec2& p : cb) {
      const double d = p.dot(axis);
      bmin = std::min(bmin, d);
      bmax = std::max(bmax, d);
    }
    if (amax < bmin || bmax < amin) return true;
  }
  return false;
}

}  // namespace

bool rects_overlap(const OrientedRect& a, const OrientedRect& b) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  return !separated_on_axes_of(a, ca, cb) && !separated_on_axes_of(b, cb, ca);
}

}  // namespace epd::geometry
