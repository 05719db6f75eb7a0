#include "irlvla/scene/polyline.hpp"

#include <algorithm>
#include <limits>

namespace irlvla::scene {

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  cumulative_.resize(points_.size(), 0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    cumulative_[i] = cumulative_[i - 1] + norm(points_[i] - points_[i - 1]);
  }
}

Projection Polyline::project(Vec2 p) const {
  Projection best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Vec2 a = points_[i];
    const Vec2 ab = points_[i + 1] - a;
    const double len2 = dot(ab, ab);
    double u = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    const Vec2 q = a + ab * u;
    const Vec2 r = p - q;
    const double d2 = dot(r, r);
    if (d2 < best_d2) {
      best_d2 = d2;
      const double seg_len = std::sqrt(len2);
      best.s = cumulative_[i] + u * seg_len;
      best.tangent = std::atan2(ab.y, ab.x);
      best.distance = std::sqrt(d2);
      // Signed distance to the polyline; the sign says which side of the segment.
      best.lateral = cross(ab, p - a) >= 0.0 ? best.distance : -best.distance;
    }
  }
  return best;
}

Vec2 Polyline::point_at(double s) const {
  if (s <= 0.0) return points_.front();
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    if (s <= cumulative_[i + 1]) {
      const double seg = cumulative_[i + 1] - cumulative_[i];
      const double u = seg > 0.0 ? (s - cumulative_[i]) / seg : 0.0;
      return points_[i] + (points_[i + 1] - points_[i]) * u;
    }
  }
  return points_.back();
}

double Polyline::tangent_at(double s) const {
  std::size_t i = 0;
  while (i + 2 < points_.size() && s > cumulative_[i + 1]) ++i;
  const Vec2 d = points_[i + 1] - points_[i];
  return std::atan2(d.y, d.x);
}

}  // namespace irlvla::scene
