#include "irlvla/scene/raster.hpp"

#include <algorithm>
#include <cmath>

#include "irlvla/scene/polyline.hpp"

namespace irlvla::scene {

int occupancy_bucket(int step, int sim_steps, int buckets) {
  return std::min(buckets - 1, step * buckets / sim_steps);
}

namespace {

FeatureGrid empty_grid(const Scene& scene, const SceneConfig& cfg) {
  double minx = scene.centerline.front().x, maxx = minx;
  double miny = scene.centerline.front().y, maxy = miny;
  for (const Vec2& p : scene.centerline) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const double pad = scene.corridor_halfwidth + cfg.grid_padding;
  FeatureGrid g;
  g.cell = cfg.grid_cell;
  g.origin = {minx - pad, miny - pad};
  g.cols = static_cast<int>(std::ceil((maxx - minx + 2.0 * pad) / g.cell)) + 1;
  g.rows = static_cast<int>(std::ceil((maxy - miny + 2.0 * pad) / g.cell)) + 1;
  g.channels = 3 + cfg.occupancy_buckets;
  g.data.assign(static_cast<std::size_t>(g.channels) * g.rows * g.cols, 0.0);
  return g;
}

void fill_row(const Scene& scene, const SceneConfig& cfg, const Polyline& cl, FeatureGrid& g,
              int r) {
  const double hw = scene.corridor_halfwidth;
  const bool red = scene.light && scene.light->state == LightState::Red;
  const double red_from = red ? scene.light->stopline_s - 0.5 * cfg.ego_footprint.length : 0.0;
  const double reach = 0.5 * std::hypot(cfg.ego_footprint.length, cfg.ego_footprint.width);
  for (int c = 0; c < g.cols; ++c) {
    const Vec2 p = g.cell_center(r, c);
    const Projection pr = cl.project(p);
    g.at(kDrivable, r, c) = pr.distance <= hw ? 1.0 : 0.0;
    g.at(kCenterlineOffset, r, c) = std::clamp(pr.lateral, -cfg.offset_clip, cfg.offset_clip);
    if (red && pr.s >= red_from) g.at(g.light_channel(), r, c) = 1.0;

    const OrientedBox ego{p, pr.tangent, cfg.ego_footprint.length, cfg.ego_footprint.width};
    for (const AgentTrack& a : scene.agents) {
      const double agent_reach = 0.5 * std::hypot(a.footprint.length, a.footprint.width);
      const int steps = std::min<int>(scene.sim_steps, static_cast<int>(a.poses.size()));
      for (int k = 0; k < steps; ++k) {
        const int ch = kOccupancy0 + occupancy_bucket(k, scene.sim_steps, cfg.occupancy_buckets);
        if (g.at(ch, r, c) > 0.0) continue;
        const Waypoint& q = a.poses[k];
        if (std::hypot(q.x - p.x, q.y - p.y) > reach + agent_reach) continue;
        const OrientedBox other{{q.x, q.y}, q.theta, a.footprint.length, a.footprint.width};
        if (boxes_overlap(ego, other)) g.at(ch, r, c) = 1.0;
      }
    }
  }
}

}  // namespace

FeatureGrid rasterize(const Scene& scene, const SceneConfig& cfg) {
  FeatureGrid g = empty_grid(scene, cfg);
  const Polyline cl(scene.centerline);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < g.rows; ++r) fill_row(scene, cfg, cl, g, r);
  return g;
}

FeatureGrid rasterize_serial(const Scene& scene, const SceneConfig& cfg) {
  FeatureGrid g = empty_grid(scene, cfg);
  const Polyline cl(scene.centerline);
  for (int r = 0; r < g.rows; ++r) fill_row(scene, cfg, cl, g, r);
  return g;
}

void sample_feature_into(const FeatureGrid& g, Vec2 point, double* out) {
  const double u = (point.x - g.origin.x) / g.cell;
  const double v = (point.y - g.origin.y) / g.cell;
  if (!(u >= 0.0 && v >= 0.0 && u <= g.cols - 1 && v <= g.rows - 1)) {
    std::fill(out, out + g.channels, 0.0);
    return;
  }
  const int c0 = std::min(static_cast<int>(u), g.cols - 2);
  const int r0 = std::min(static_cast<int>(v), g.rows - 2);
  const double fu = u - c0;
  const double fv = v - r0;
  for (int ch = 0; ch < g.channels; ++ch) {
    const double top = (1.0 - fu) * g.at(ch, r0, c0) + fu * g.at(ch, r0, c0 + 1);
    const double bottom = (1.0 - fu) * g.at(ch, r0 + 1, c0) + fu * g.at(ch, r0 + 1, c0 + 1);
    out[ch] = (1.0 - fv) * top + fv * bottom;
  }
}

std::vector<double> sample_feature(const FeatureGrid& grid, Vec2 point) {
  std::vector<double> out(grid.channels);
  sample_feature_into(grid, point, out.data());
  return out;
}

}  // namespace irlvla::scene
