#pragma once

#include <vector>

#include "irlvla/scene/geometry.hpp"

namespace irlvla::scene {

struct Projection {
  double s = 0.0;        // arclength of the closest point
  double lateral = 0.0;  // signed distance, positive to the left of travel
  double distance = 0.0; // unsigned Euclidean distance to the polyline
  double tangent = 0.0;  // heading of the closest segment
};

// Polyline with cached cumulative arclength.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);

  const std::vector<Vec2>& points() const { return points_; }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  double arclength_at(std::size_t i) const { return cumulative_[i]; }

  // Closest point over all segments; ties resolve to the lowest segment index.
  Projection project(Vec2 p) const;
  Vec2 point_at(double s) const;
  double tangent_at(double s) const;

 private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

}  // namespace irlvla::scene
