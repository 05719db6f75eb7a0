#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace irlvla::scene {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 heading_vector(double theta) { return {std::cos(theta), std::sin(theta)}; }

// Maps any angle into (-pi, pi].
double wrap_angle(double a);

struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;

  // Counter-clockwise: front-left, rear-left, rear-right, front-right.
  std::array<Vec2, 4> corners() const;
};

// Separating-axis test for two oriented rectangles. Touching counts as overlap.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

bool box_contains(const OrientedBox& box, Vec2 p);

}  // namespace irlvla::scene
