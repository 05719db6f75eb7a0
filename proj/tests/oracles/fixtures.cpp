#include "fixtures.hpp"

#include <cmath>
#include <filesystem>

#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"
#include "irlvla/metrics/oracle.hpp"
#include "irlvla/scene/expert.hpp"
#include "irlvla/scene/generator.hpp"

namespace irlvla::testkit {

scene::Scene straight_scene(double speed, double halfwidth) {
  scene::Scene s;
  s.id = "straight";
  for (int i = -4; i <= 40; ++i) s.centerline.push_back({5.0 * i, 0.0});
  s.corridor_halfwidth = halfwidth;
  s.ego0.pose = {0.0, 0.0, 0.0};
  s.ego0.speed = speed;
  return s;
}

void add_agent(scene::Scene& s, const std::function<scene::Waypoint(int)>& pose, scene::Footprint fp) {
  scene::AgentTrack a;
  a.footprint = fp;
  for (int k = 0; k < s.sim_steps; ++k) a.poses.push_back(pose(k));
  s.agents.push_back(a);
}

scene::Trajectory straight_traj(const scene::Scene& s, double speed, double lateral) {
  scene::Trajectory t;
  t.dt = s.dt;
  for (int k = 1; k < s.sim_steps; ++k) {
    t.waypoints.push_back({s.ego0.pose.x + speed * k * s.dt, s.ego0.pose.y + lateral, 0.0});
  }
  return t;
}

RandomPair random_pair(std::uint64_t seed) {
  Rng rng(seed);
  const auto diff = static_cast<scene::Difficulty>(rng.uniform_int(0, 2));
  RandomPair p;
  p.scene = scene::generate_scene(mix_seed(seed, 1), diff);
  std::optional<scene::Trajectory> expert;
  try {
    expert = scene::expert_trajectory(p.scene);
  } catch (const Error&) {
  }
  p.reference_progress =
      expert ? metrics::centerline_progress(*expert, p.scene) : rng.uniform(0.0, 40.0);
  const auto& e0 = p.scene.ego0;
  const scene::Trajectory base = expert ? *expert : scene::constant_velocity_trajectory(p.scene);
  p.traj = base;
  switch (rng.uniform_int(0, 6)) {
    case 0:
      p.kind = "expert";
      break;
    case 1:
      p.kind = "cv";
      p.traj = scene::constant_velocity_trajectory(p.scene);
      break;
    case 2: {
      p.kind = "noisy";
      const double sd = rng.uniform(0.0, 1.0);
      for (auto& w : p.traj.waypoints) {
        w.x += sd * rng.normal();
        w.y += sd * rng.normal();
        w.theta = scene::wrap_angle(w.theta + 0.2 * sd * rng.normal());
      }
      break;
    }
    case 3: {
      p.kind = "controls";
      double x = e0.pose.x, y = e0.pose.y, th = e0.pose.theta, v = e0.speed;
      for (auto& w : p.traj.waypoints) {
        v += rng.uniform(-4.0, 4.0) * p.traj.dt;
        th = scene::wrap_angle(th + rng.uniform(-0.3, 0.3));
        x += v * std::cos(th) * p.traj.dt;
        y += v * std::sin(th) * p.traj.dt;
        w = {x, y, th};
      }
      break;
    }
    case 4:
      p.kind = "stationary";
      for (auto& w : p.traj.waypoints) w = e0.pose;
      break;
    case 5: {
      p.kind = "shifted";
      const double d = rng.uniform(-3.0, 3.0);
      for (auto& w : p.traj.waypoints) {
        w.x -= d * std::sin(w.theta);
        w.y += d * std::cos(w.theta);
      }
      break;
    }
    default: {
      p.kind = "reverse";
      const double step = rng.uniform(0.0, 1.5);
      for (std::size_t k = 0; k < p.traj.waypoints.size(); ++k) {
        const double d = -step * static_cast<double>(k + 1);
        p.traj.waypoints[k] = {e0.pose.x + d * std::cos(e0.pose.theta), e0.pose.y + d * std::sin(e0.pose.theta),
                               e0.pose.theta};
      }
      break;
    }
  }
  return p;
}

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("irlvla_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

anchors::AnchorSet toy_anchors(int K, std::uint64_t seed) {
  Rng rng(seed);
  anchors::AnchorSet a;
  a.K = K;
  for (int k = 0; k < K; ++k) {
    scene::Trajectory t;
    const double v = rng.uniform(2.0, 12.0), yaw = rng.uniform(-0.1, 0.1);
    double x = 0, y = 0, th = 0;
    for (int i = 0; i < 8; ++i) {
      th += yaw;
      x += v * 0.5 * std::cos(th);
      y += v * 0.5 * std::sin(th);
      t.waypoints.push_back({x, y, th});
    }
    a.anchors.push_back(t);
  }
  return a;
}

}  // namespace irlvla::testkit
