#include "brute_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace irlvla::testkit {

using scene::Vec2;

std::array<Vec2, 4> footprint_corners(double x, double y, double heading, double length,
                                      double width) {
  const double c = std::cos(heading), s = std::sin(heading);
  std::array<Vec2, 4> out;
  const double hl = 0.5 * length, hw = 0.5 * width;
  const double lx[4] = {hl, -hl, -hl, hl};
  const double ly[4] = {hw, hw, -hw, -hw};
  for (int i = 0; i < 4; ++i) out[i] = {x + c * lx[i] - s * ly[i], y + s * lx[i] + c * ly[i]};
  return out;
}

namespace {

double orient(Vec2 a, Vec2 b, Vec2 c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = orient(c, d, a), d2 = orient(c, d, b), d3 = orient(a, b, c), d4 = orient(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(c, d, a)) return true;
  if (d2 == 0 && on_segment(c, d, b)) return true;
  if (d3 == 0 && on_segment(a, b, c)) return true;
  if (d4 == 0 && on_segment(a, b, d)) return true;
  return false;
}

bool inside(const std::array<Vec2, 4>& poly, Vec2 p) {
  bool pos = false, neg = false;
  for (int i = 0; i < 4; ++i) {
    const double o = orient(poly[i], poly[(i + 1) % 4], p);
    pos = pos || o > 0;
    neg = neg || o < 0;
  }
  return !(pos && neg);
}

}  // namespace

bool quads_overlap(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (segments_cross(a[i], a[(i + 1) % 4], b[j], b[(j + 1) % 4])) return true;
    }
  }
  return inside(a, b[0]) || inside(b, a[0]);
}

LineHit nearest_on_centerline(const std::vector<Vec2>& line, Vec2 p) {
  LineHit best;
  double best_d = std::numeric_limits<double>::infinity();
  double s0 = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const double ex = line[i + 1].x - line[i].x, ey = line[i + 1].y - line[i].y;
    const double len = std::sqrt(ex * ex + ey * ey);
    const double px = p.x - line[i].x, py = p.y - line[i].y;
    double u = len > 0 ? (px * ex + py * ey) / (len * len) : 0.0;
    u = u < 0 ? 0 : (u > 1 ? 1 : u);
    const double qx = line[i].x + u * ex, qy = line[i].y + u * ey;
    const double d = std::sqrt((p.x - qx) * (p.x - qx) + (p.y - qy) * (p.y - qy));
    if (d < best_d) {
      best_d = d;
      best.s = s0 + u * len;
      best.signed_distance = (ex * py - ey * px) >= 0 ? d : -d;
    }
    s0 += len;
  }
  return best;
}

metrics::MetricVector brute_score(const scene::Trajectory& traj, const scene::Scene& scene,
                                  const metrics::MetricConfig& cfg, double reference_progress) {
  const int n = static_cast<int>(traj.waypoints.size()) + 1;
  const double dt = traj.dt;
  std::vector<scene::Waypoint> pose(n);
  pose[0] = scene.ego0.pose;
  for (int k = 1; k < n; ++k) pose[k] = traj.waypoints[k - 1];

  std::vector<double> vx(n), vy(n), speed(n), accel(n), jerk(n, 0.0);
  vx[0] = std::cos(pose[0].theta) * scene.ego0.speed;
  vy[0] = std::sin(pose[0].theta) * scene.ego0.speed;
  speed[0] = scene.ego0.speed;
  accel[0] = scene.ego0.accel;
  for (int k = 1; k < n; ++k) {
    vx[k] = (pose[k].x - pose[k - 1].x) / dt;
    vy[k] = (pose[k].y - pose[k - 1].y) / dt;
    speed[k] = std::sqrt(vx[k] * vx[k] + vy[k] * vy[k]);
    accel[k] = (speed[k] - speed[k - 1]) / dt;
    jerk[k] = (accel[k] - accel[k - 1]) / dt;
  }

  std::vector<LineHit> hit(n);
  for (int k = 0; k < n; ++k) hit[k] = nearest_on_centerline(scene.centerline, {pose[k].x, pose[k].y});

  const double L = cfg.ego_footprint.length, W = cfg.ego_footprint.width;
  metrics::MetricVector out;

  // NC
  double nc = 1.0;
  for (int k = 1; k < n; ++k) {
    const auto ego = footprint_corners(pose[k].x, pose[k].y, pose[k].theta, L, W);
    for (const auto& a : scene.agents) {
      const auto& q = a.poses[k];
      if (!quads_overlap(ego, footprint_corners(q.x, q.y, q.theta, a.footprint.length, a.footprint.width))) {
        continue;
      }
      const double ahead = (q.x - pose[k].x) * std::cos(pose[k].theta) + (q.y - pose[k].y) * std::sin(pose[k].theta);
      const double v = (speed[k] < cfg.at_fault_speed || ahead < 0.0) ? 0.5 : 0.0;
      nc = std::min(nc, v);
    }
  }
  out.nc = nc;

  // DAC
  out.dac = 1.0;
  for (int k = 1; k < n; ++k) {
    for (const Vec2& c : footprint_corners(pose[k].x, pose[k].y, pose[k].theta, L, W)) {
      if (std::abs(nearest_on_centerline(scene.centerline, c).signed_distance) > scene.corridor_halfwidth) {
        out.dac = 0.0;
      }
    }
  }

  // DDC
  double back = 0.0;
  for (int k = 1; k < n; ++k) {
    if (hit[k].s < hit[k - 1].s) back += hit[k - 1].s - hit[k].s;
  }
  if (back <= cfg.ddc_tolerance) out.ddc = 1.0;
  else if (back < cfg.ddc_partial) out.ddc = 0.5;
  else out.ddc = 0.0;

  // TLC
  out.tlc = 1.0;
  if (scene.light && scene.light->state == scene::LightState::Red &&
      hit[0].s + 0.5 * L <= scene.light->stopline_s) {
    for (int k = 1; k < n; ++k) {
      if (hit[k].s + 0.5 * L > scene.light->stopline_s) out.tlc = 0.0;
    }
  }

  // EP
  if (reference_progress < cfg.ep_min_progress) {
    out.ep = 1.0;
  } else {
    const double r = (hit[n - 1].s - hit[0].s) / reference_progress;
    out.ep = r < 0 ? 0.0 : (r > 1 ? 1.0 : r);
  }

  // TTC
  out.ttc = 1.0;
  const int samples = static_cast<int>(std::lround(cfg.ttc_horizon / cfg.ttc_step));
  for (int k = 1; k < n; ++k) {
    for (const auto& a : scene.agents) {
      const int m = static_cast<int>(a.poses.size());
      const int i0 = k + 1 < m ? k : m - 2;
      const double ax = (a.poses[i0 + 1].x - a.poses[i0].x) / dt;
      const double ay = (a.poses[i0 + 1].y - a.poses[i0].y) / dt;
      for (int j = 0; j <= samples; ++j) {
        const double t = j * cfg.ttc_step;
        const auto e = footprint_corners(pose[k].x + vx[k] * t, pose[k].y + vy[k] * t, pose[k].theta, L, W);
        const auto o = footprint_corners(a.poses[k].x + ax * t, a.poses[k].y + ay * t, a.poses[k].theta,
                                         a.footprint.length, a.footprint.width);
        if (quads_overlap(e, o)) out.ttc = 0.0;
      }
    }
  }

  // LK
  out.lk = 1.0;
  for (int k = 1; k < n; ++k) {
    if (std::abs(hit[k].signed_distance) > cfg.lk_max_offset) out.lk = 0.0;
  }

  // HC
  out.hc = 1.0;
  for (int k = 1; k < n; ++k) {
    if (std::abs(accel[k]) > cfg.hc_max_accel || std::abs(jerk[k]) > cfg.hc_max_jerk) out.hc = 0.0;
  }
  return out;
}

}  // namespace irlvla::testkit
