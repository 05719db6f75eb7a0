#include "irlvla/rwm/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "irlvla/common/error.hpp"
#include "irlvla/metrics/oracle.hpp"
#include "irlvla/scene/raster.hpp"

namespace irlvla::rwm {

using scene::Vec2;

int grid_block_size(const scene::SceneConfig& cfg) {
  return cfg.horizon * (3 + cfg.occupancy_buckets);
}

int traj_feature_size(const scene::SceneConfig& cfg) {
  return grid_block_size(cfg) + cfg.horizon * kStepFeatures + kSummaryFeatures +
         kContextPoints * (cfg.occupancy_buckets + 1);
}

namespace {

double clip(double v, double lim) { return std::clamp(v, -lim, lim); }

struct Nearest {
  double lon = 2.0;
  double lat = 2.0;
  double dist = 2.0;
};

Nearest nearest_agent(const scene::Scene& sc, const scene::Waypoint& ego, std::size_t k) {
  Nearest n;
  double best = std::numeric_limits<double>::infinity();
  const Vec2 h = scene::heading_vector(ego.theta);
  for (const auto& a : sc.agents) {
    const auto& p = a.poses[k];
    const Vec2 d{p.x - ego.x, p.y - ego.y};
    const double dist = scene::norm(d);
    if (dist < best) {
      best = dist;
      n.lon = clip(scene::dot(d, h) / 10.0, 2.0);
      n.lat = clip(scene::cross(h, d) / 5.0, 2.0);
      n.dist = std::min(dist / 10.0, 2.0);
    }
  }
  return n;
}

double projected_gap(const scene::Scene& sc, const metrics::Kinematics& kin, std::size_t k,
                     double horizon_t, double dt) {
  double best = 2.0;
  const Vec2 e{kin.poses[k].x + kin.velocity[k].x * horizon_t,
               kin.poses[k].y + kin.velocity[k].y * horizon_t};
  for (const auto& a : sc.agents) {
    const std::size_t i0 = k + 1 < a.poses.size() ? k : a.poses.size() - 2;
    const Vec2 v{(a.poses[i0 + 1].x - a.poses[i0].x) / dt, (a.poses[i0 + 1].y - a.poses[i0].y) / dt};
    const Vec2 p{a.poses[k].x + v.x * horizon_t, a.poses[k].y + v.y * horizon_t};
    best = std::min(best, scene::norm(p - e) / 10.0);
  }
  return best;
}

}  // namespace

diffgraph::Vector extract_traj_feature(const scene::Scene& sc, const scene::FeatureGrid& grid,
                                       const scene::Trajectory& traj,
                                       const scene::SceneConfig& cfg) {
  const int l = cfg.horizon;
  if (static_cast<int>(traj.size()) != l) {
    fail(ErrorCode::HorizonMismatch, "trajectory horizon " + std::to_string(traj.size()) +
                                         " != configured " + std::to_string(l));
  }
  for (const auto& a : sc.agents) {
    if (static_cast<int>(a.poses.size()) < l + 1) {
      fail(ErrorCode::HorizonMismatch, "agent track shorter than the trajectory horizon");
    }
  }
  const int ch = 3 + cfg.occupancy_buckets;
  diffgraph::Vector f = diffgraph::Vector::Zero(traj_feature_size(cfg));
  int o = 0;

  std::vector<double> buf(ch);
  for (int i = 0; i < l; ++i) {
    scene::sample_feature_into(grid, {traj.waypoints[i].x, traj.waypoints[i].y}, buf.data());
    for (int q = 0; q < ch; ++q) f(o++) = buf[q];
  }

  const scene::Polyline cl(sc.centerline);
  const metrics::Kinematics kin = metrics::compute_kinematics(traj, sc.ego0);
  const double s0 = cl.project({sc.ego0.pose.x, sc.ego0.pose.y}).s;
  const double half_len = 0.5 * cfg.ego_footprint.length;
  const bool red = sc.light && sc.light->state == scene::LightState::Red &&
                   s0 + half_len <= sc.light->stopline_s;
  double prev_s = s0, path = 0.0, reverse = 0.0, peak_a = 0.0, peak_j = 0.0;
  for (int k = 1; k <= l; ++k) {
    const auto& w = kin.poses[k];
    const scene::Projection pr = cl.project({w.x, w.y});
    const double tangent = pr.tangent;
    double margin = -std::numeric_limits<double>::infinity();
    for (const Vec2& c : scene::ego_box(w, cfg.ego_footprint).corners()) {
      margin = std::max(margin, cl.project(c).distance - sc.corridor_halfwidth);
    }
    f(o++) = clip(kin.speed[k] / 10.0, 3.0);
    f(o++) = clip(kin.accel[k] / 3.0, 5.0);
    f(o++) = clip(kin.jerk[k] / 5.0, 5.0);
    f(o++) = scene::wrap_angle(w.theta - tangent);
    f(o++) = clip(pr.lateral / 2.0, 5.0);
    f(o++) = clip(margin / 2.0, 5.0);
    f(o++) = clip((pr.s - prev_s) / 5.0, 5.0);
    f(o++) = red ? clip((sc.light->stopline_s - pr.s - half_len) / 5.0, 2.0) : 2.0;
    const Nearest n = nearest_agent(sc, w, static_cast<std::size_t>(k));
    f(o++) = n.lon;
    f(o++) = n.lat;
    f(o++) = n.dist;
    f(o++) = projected_gap(sc, kin, k, 0.5, traj.dt);
    f(o++) = projected_gap(sc, kin, k, 1.0, traj.dt);
    path += std::hypot(w.x - kin.poses[k - 1].x, w.y - kin.poses[k - 1].y);
    reverse += std::max(0.0, prev_s - pr.s);
    peak_a = std::max(peak_a, std::abs(kin.accel[k]));
    peak_j = std::max(peak_j, std::abs(kin.jerk[k]));
    prev_s = pr.s;
  }

  f(o++) = sc.ego0.speed / 10.0;
  f(o++) = sc.ego0.accel / 3.0;
  f(o++) = std::min(peak_a / 3.0, 5.0);
  f(o++) = std::min(peak_j / 5.0, 5.0);
  f(o++) = path / 40.0;
  f(o++) = clip((prev_s - s0) / 40.0, 3.0);
  f(o++) = std::min(reverse / 2.0, 5.0);

  for (int i = 1; i <= kContextPoints; ++i) {
    const Vec2 p = cl.point_at(s0 + i * kContextSpacing);
    scene::sample_feature_into(grid, p, buf.data());
    for (int b = 0; b < cfg.occupancy_buckets; ++b) f(o++) = buf[scene::kOccupancy0 + b];
    f(o++) = buf[grid.light_channel()];
  }
  return f;
}

}  // namespace irlvla::rwm
