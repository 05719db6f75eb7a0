#include "irlvla/scene/geometry.hpp"

#include <algorithm>

namespace irlvla::scene {

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

std::array<Vec2, 4> OrientedBox::corners() const {
  const Vec2 f = heading_vector(heading) * (0.5 * length);
  const Vec2 l = Vec2{-std::sin(heading), std::cos(heading)} * (0.5 * width);
  return {center + f + l, center - f + l, center - f - l, center + f - l};
}

namespace {

void project(const std::array<Vec2, 4>& pts, Vec2 axis, double& lo, double& hi) {
  lo = hi = dot(pts[0], axis);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = dot(pts[i], axis);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes = {heading_vector(a.heading),
                                    Vec2{-std::sin(a.heading), std::cos(a.heading)},
                                    heading_vector(b.heading),
                                    Vec2{-std::sin(b.heading), std::cos(b.heading)}};
  for (const Vec2& axis : axes) {
    double alo, ahi, blo, bhi;
    project(ca, axis, alo, ahi);
    project(cb, axis, blo, bhi);
    if (ahi < blo || bhi < alo) return false;
  }
  return true;
}

bool box_contains(const OrientedBox& box, Vec2 p) {
  const Vec2 d = p - box.center;
  const double lon = dot(d, heading_vector(box.heading));
  const double lat = dot(d, Vec2{-std::sin(box.heading), std::cos(box.heading)});
  return std::abs(lon) <= 0.5 * box.length && std::abs(lat) <= 0.5 * box.width;
}

}  // namespace irlvla::scene
