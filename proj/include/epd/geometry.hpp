#pragma once

#include "epd/common.hpp"

namespace epd::geometry {

// Center pose + full side lengths of an axis-aligned-in-body rectangle.
struct OrientedRect {
  Vec2 center{};
  double heading{0.0};
  double length{1.0};  // extent along the heading
  double width{1.0};
};

// Separating-axis overlap test; touching edges count as overlap.
bool rects_overlap(const OrientedRect& a, const OrientedRect& b);

}  // namespace epd::geometry
