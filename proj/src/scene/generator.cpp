#include "irlvla/scene/generator.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "irlvla/common/rng.hpp"

namespace irlvla::scene {

namespace {

constexpr double kBehind = 20.0;   // centerline length behind the ego start
constexpr double kAhead = 80.0;    // centerline length ahead of the ego start
constexpr double kSpacing = 2.0;

std::vector<Vec2> build_centerline(double straight, double curvature) {
  std::vector<Vec2> pts;
  Vec2 p{-kBehind, 0.0};
  double heading = 0.0;
  pts.push_back(p);
  const int n = static_cast<int>((kBehind + kAhead) / kSpacing);
  for (int i = 1; i <= n; ++i) {
    const double s_mid = (i - 0.5) * kSpacing - kBehind;
    if (s_mid > straight) heading += curvature * kSpacing;
    p = p + heading_vector(heading) * kSpacing;
    pts.push_back(p);
  }
  return pts;
}

AgentTrack lead_track(const Polyline& cl, double s0, double speed, int steps, double dt) {
  AgentTrack t;
  t.footprint = Footprint{4.6, 1.9};
  for (int k = 0; k < steps; ++k) {
    const double s = s0 + speed * k * dt;
    const Vec2 p = cl.point_at(s);
    t.poses.push_back({p.x, p.y, wrap_angle(cl.tangent_at(s))});
  }
  return t;
}

// Track moving perpendicular to the centerline through the point at s_cross.
AgentTrack crossing_track(const Polyline& cl, double s_cross, double lat0, double dir,
                          double speed, int steps, double dt) {
  AgentTrack t;
  t.footprint = Footprint{4.6, 1.9};
  const Vec2 base = cl.point_at(s_cross);
  const double tangent = cl.tangent_at(s_cross);
  const Vec2 normal{-std::sin(tangent), std::cos(tangent)};
  const double heading = wrap_angle(tangent + dir * std::numbers::pi / 2.0);
  for (int k = 0; k < steps; ++k) {
    const double lat = lat0 + dir * speed * k * dt;
    const Vec2 p = base + normal * lat;
    t.poses.push_back({p.x, p.y, heading});
  }
  return t;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, Difficulty difficulty, const SceneConfig& cfg) {
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(difficulty) + 1));
  Scene scene;
  char id[48];
  std::snprintf(id, sizeof(id), "%s-%06llu", to_string(difficulty).c_str(),
                static_cast<unsigned long long>(seed));
  scene.id = id;
  scene.seed = seed;
  scene.difficulty = difficulty;
  scene.dt = cfg.dt;
  scene.sim_steps = cfg.sim_steps();

  const bool easy = difficulty == Difficulty::Easy;
  scene.corridor_halfwidth = easy ? rng.uniform(3.0, 3.5) : rng.uniform(2.6, 3.5);

  double curvature = 0.0;
  double straight = 0.0;
  if (!easy && rng.bernoulli(0.6)) {
    curvature = rng.uniform(0.004, 0.02) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    straight = rng.uniform(0.0, 20.0);
  }
  scene.centerline = build_centerline(straight, curvature);
  const Polyline cl(scene.centerline);
  const double s_ego = kBehind;

  scene.ego0.pose = {0.0, 0.0, 0.0};
  scene.ego0.speed = easy ? rng.uniform(5.0, 12.0) : rng.uniform(4.0, 11.0);
  scene.ego0.accel = easy ? 0.0 : rng.uniform(-0.3, 0.3);
  const double v0 = scene.ego0.speed;
  const double stop_dist = v0 * v0 / (2.0 * cfg.expert_accel);
  const int steps = scene.sim_steps;
  const double dt = scene.dt;

  if (difficulty == Difficulty::Medium) {
    if (rng.bernoulli(0.5)) {
      const double gap = rng.uniform(15.0, 35.0);
      const double speed = v0 * rng.uniform(0.3, 0.9);
      scene.agents.push_back(lead_track(cl, s_ego + gap, speed, steps, dt));
    }
    if (rng.bernoulli(0.5)) {
      TrafficLight light;
      light.state = rng.bernoulli(0.5) ? LightState::Red : LightState::Green;
      light.stopline_s = s_ego + stop_dist + rng.uniform(12.0, 45.0);
      scene.light = light;
    }
  } else if (difficulty == Difficulty::Hard) {
    TrafficLight light;
    light.state = rng.bernoulli(0.6) ? LightState::Red : LightState::Green;
    light.stopline_s = s_ego + stop_dist + rng.uniform(12.0, 45.0);
    scene.light = light;

    const int n_cross = rng.bernoulli(0.5) ? 2 : 1;
    double last_cross = -1e9;
    for (int i = 0; i < n_cross; ++i) {
      double s_cross = s_ego + stop_dist + rng.uniform(10.0, 40.0);
      if (std::abs(s_cross - last_cross) < 10.0) s_cross = last_cross + 12.0;
      last_cross = s_cross;
      const double dir = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const double speed = rng.uniform(2.0, 6.0);
      const double t_center = rng.uniform(0.8, 3.2);
      const double lat_mag = std::max(speed * t_center, scene.corridor_halfwidth + 2.8);
      scene.agents.push_back(crossing_track(cl, s_cross, -dir * lat_mag, dir, speed, steps, dt));
    }
  }

  scene.command = Command::Follow;
  if (curvature > 0.008) scene.command = Command::TurnLeft;
  if (curvature < -0.008) scene.command = Command::TurnRight;
  if (scene.light && scene.light->state == LightState::Red &&
      scene.light->stopline_s - s_ego < 50.0) {
    scene.command = Command::Stop;
  }
  return scene;
}

bool track_enters_corridor(const Scene& scene, const AgentTrack& track) {
  const Polyline cl(scene.centerline);
  for (const auto& p : track.poses) {
    if (cl.project({p.x, p.y}).distance <= scene.corridor_halfwidth) return true;
  }
  return false;
}

bool is_crossing_agent(const Scene& scene, const AgentTrack& track) {
  if (track.poses.empty()) return false;
  const Polyline cl(scene.centerline);
  for (const auto& p : track.poses) {
    const Projection pr = cl.project({p.x, p.y});
    if (std::abs(wrap_angle(p.theta - pr.tangent)) > std::numbers::pi / 4.0 &&
        std::abs(wrap_angle(p.theta - pr.tangent)) < 3.0 * std::numbers::pi / 4.0) {
      return true;
    }
  }
  return false;
}

}  // namespace irlvla::scene
