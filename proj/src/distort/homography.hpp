#pragma once

#include <array>

#include "error.hpp"

namespace xstab {

struct Vec2 {
  double u = 0.0;
  double v = 0.0;
};

// 3x3 projective transform, normalized so h[2][2] == 1.
struct Homography {
  std::array<std::array<double, 3>, 3> h{};

  Vec2 apply(Vec2 p) const {
    const double x = h[0][0] * p.u + h[0][1] * p.v + h[0][2];
    const double y = h[1][0] * p.u + h[1][1] * p.v + h[1][2];
    const double w = h[2][0] * p.u + h[2][1] * p.v + h[2][2];
    if (w == 0.0) fail(Err::DegenerateQuad, "homography maps point to infinity");
    return {x / w, y / w};
  }
};

// Solves the 8-unknown linear system mapping each src corner onto its dst
// corner; throws DegenerateQuad when the system is singular.
Homography solve_homography(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst);

}  // namespace xstab
