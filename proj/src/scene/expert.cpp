#include "irlvla/scene/expert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "irlvla/common/error.hpp"
#include "irlvla/metrics/oracle.hpp"
#include "irlvla/scene/generator.hpp"
#include "irlvla/scene/polyline.hpp"

namespace irlvla::scene {

namespace {

Waypoint agent_pose_at(const AgentTrack& a, double t, double dt) {
  const double u = std::clamp(t / dt, 0.0, static_cast<double>(a.poses.size() - 1));
  const auto k = std::min(static_cast<std::size_t>(u), a.poses.size() - 1);
  if (k + 1 >= a.poses.size()) return a.poses.back();
  const double f = u - static_cast<double>(k);
  const auto& p = a.poses[k];
  const auto& q = a.poses[k + 1];
  return {p.x + f * (q.x - p.x), p.y + f * (q.y - p.y), p.theta};
}

struct CrossingInfo {
  std::size_t agent = 0;
  double rear_s = 0.0;  // stop target for the ego front when yielding
  double t_out = 0.0;   // time the agent has left the corridor band
};

struct Obstacle {
  double rear_s;
  double speed;
};

struct Plan {
  Trajectory traj;
  int soft_failures = 0;
  double progress = 0.0;
};

class ExpertPlanner {
 public:
  ExpertPlanner(const Scene& scene, const SceneConfig& cfg)
      : scene_(scene), cfg_(cfg), cl_(scene.centerline) {
    const double horizon_t = (scene.sim_steps - 1) * scene.dt;
    for (std::size_t i = 0; i < scene.agents.size(); ++i) {
      const AgentTrack& a = scene.agents[i];
      if (!is_crossing_agent(scene, a)) {
        leads_.push_back(i);
        continue;
      }
      CrossingInfo info;
      info.agent = i;
      double best_d = std::numeric_limits<double>::infinity();
      double s_cross = 0.0;
      const double band = scene.corridor_halfwidth + 0.5 * a.footprint.length + 0.5;
      double t_out = -1.0;
      for (double t = 0.0; t <= horizon_t + 1e-9; t += cfg.expert_substep) {
        const Waypoint p = agent_pose_at(a, t, scene.dt);
        const Projection pr = cl_.project({p.x, p.y});
        if (pr.distance < best_d) {
          best_d = pr.distance;
          s_cross = pr.s;
        }
        if (pr.distance <= band) t_out = t + cfg.expert_substep;
      }
      if (t_out < 0.0) continue;  // never reaches the corridor
      // Still inside at the end of the horizon: blocked for the whole plan.
      info.t_out = t_out >= horizon_t ? std::numeric_limits<double>::infinity() : t_out + 0.3;
      info.rear_s = s_cross - 0.5 * a.footprint.width - 1.0;
      crossings_.push_back(info);
    }
  }

  Trajectory plan() const {
    const std::size_t n = std::min<std::size_t>(crossings_.size(), 3);
    const unsigned masks = 1u << n;
    metrics::MetricConfig mc;
    mc.ego_footprint = cfg_.ego_footprint;
    metrics::ScoringOptions opts;
    opts.reference_progress = 0.0;

    std::optional<Plan> best;
    for (unsigned mask = 0; mask < masks; ++mask) {
      for (double factor : {1.0, 0.75, 0.5}) {
        Plan p;
        p.traj = simulate(mask, factor);
        const auto m = metrics::score_trajectory(p.traj, scene_, mc, opts);
        if (m.nc < 1.0 || m.ttc < 1.0 || m.tlc < 1.0 || m.hc < 1.0) continue;
        p.soft_failures = (m.dac < 1.0) + (m.lk < 1.0) + (m.ddc < 1.0);
        p.progress = metrics::centerline_progress(p.traj, scene_);
        if (!best || p.soft_failures < best->soft_failures ||
            (p.soft_failures == best->soft_failures && p.progress > best->progress + 1e-9)) {
          best = std::move(p);
        }
      }
    }
    if (!best) fail(ErrorCode::ExpertInfeasible, "no compliant expert plan for " + scene_.id);
    return best->traj;
  }

 private:
  Trajectory simulate(unsigned yield_mask, double speed_factor) const {
    const double dt = scene_.dt;
    const int sub = std::max(1, static_cast<int>(std::lround(dt / cfg_.expert_substep)));
    const double h = dt / sub;
    const double half_len = 0.5 * cfg_.ego_footprint.length;
    const double v_des = std::max(1.0, speed_factor * scene_.ego0.speed);
    const double a_max = cfg_.expert_accel;
    const double b = cfg_.expert_comfort_decel;
    const double a_floor = -0.95 * cfg_.max_accel;

    double x = scene_.ego0.pose.x;
    double y = scene_.ego0.pose.y;
    double theta = scene_.ego0.pose.theta;
    double v = scene_.ego0.speed;
    double a = scene_.ego0.accel;
    const bool red = scene_.light && scene_.light->state == LightState::Red;
    const double s_start = cl_.project({x, y}).s;
    const bool light_ahead = red && s_start + half_len <= scene_.light->stopline_s - 0.5;

    Trajectory traj;
    traj.dt = dt;
    double t = 0.0;
    for (int k = 1; k < scene_.sim_steps; ++k) {
      for (int i = 0; i < sub; ++i) {
        const Projection pr = cl_.project({x, y});
        const double front = pr.s + half_len;

        std::vector<Obstacle> obstacles;
        if (light_ahead) obstacles.push_back({scene_.light->stopline_s, 0.0});
        for (std::size_t c = 0; c < crossings_.size(); ++c) {
          if (c < 3 && !(yield_mask & (1u << c))) continue;
          const CrossingInfo& info = crossings_[c];
          if (t <= info.t_out && front <= info.rear_s + 0.5) obstacles.push_back({info.rear_s, 0.0});
        }
        for (std::size_t li : leads_) {
          const AgentTrack& ag = scene_.agents[li];
          const Waypoint p = agent_pose_at(ag, t, dt);
          const Projection ap = cl_.project({p.x, p.y});
          if (ap.distance > scene_.corridor_halfwidth + 1.0 || ap.s <= pr.s) continue;
          const Waypoint q = agent_pose_at(ag, t + 0.1, dt);
          const double sp = std::hypot(q.x - p.x, q.y - p.y) / 0.1;
          obstacles.push_back({ap.s - 0.5 * ag.footprint.length, sp});
        }

        double accel = a_max * (1.0 - std::pow(v / v_des, 4));
        double interaction = 0.0;
        for (const Obstacle& o : obstacles) {
          const double gap = std::max(0.1, o.rear_s - front);
          const double s_star = cfg_.expert_gap +
                                std::max(0.0, v * cfg_.expert_headway +
                                                  v * (v - o.speed) / (2.0 * std::sqrt(a_max * b)));
          interaction = std::min(interaction, -a_max * (s_star / gap) * (s_star / gap));
        }
        accel += interaction;
        accel = std::clamp(accel, a_floor, a_max);
        const double max_da = cfg_.max_jerk * h;
        accel = std::clamp(accel, a - max_da, a + max_da);
        if (v <= 0.0 && accel < 0.0) accel = std::max(accel, 0.0);
        a = accel;

        // Pure pursuit toward a lookahead point on the centerline.
        const double lookahead = std::max(4.0, 0.8 * v + 2.0);
        const Vec2 target = cl_.point_at(pr.s + lookahead);
        const double alpha = wrap_angle(std::atan2(target.y - y, target.x - x) - theta);
        const double kappa = std::clamp(2.0 * std::sin(alpha) / lookahead, -cfg_.max_curvature,
                                        cfg_.max_curvature);

        double v_next = std::clamp(v + a * h, 0.0, cfg_.v_max);
        const double v_mid = 0.5 * (v + v_next);
        theta = wrap_angle(theta + v_mid * kappa * h);
        x += v_mid * std::cos(theta) * h;
        y += v_mid * std::sin(theta) * h;
        if (v_next == 0.0 && a < 0.0) a = 0.0;
        v = v_next;
        t += h;
      }
      traj.waypoints.push_back({x, y, wrap_angle(theta)});
    }
    return traj;
  }

  const Scene& scene_;
  const SceneConfig& cfg_;
  Polyline cl_;
  std::vector<std::size_t> leads_;
  std::vector<CrossingInfo> crossings_;
};

}  // namespace

Trajectory expert_trajectory(const Scene& scene, const SceneConfig& cfg) {
  return ExpertPlanner(scene, cfg).plan();
}

Trajectory constant_velocity_trajectory(const Scene& scene, const SceneConfig& cfg) {
  Trajectory traj;
  traj.dt = scene.dt;
  const auto& p = scene.ego0.pose;
  const double v = std::min(scene.ego0.speed, cfg.v_max);
  for (int k = 1; k < scene.sim_steps; ++k) {
    const double d = v * k * scene.dt;
    traj.waypoints.push_back({p.x + d * std::cos(p.theta), p.y + d * std::sin(p.theta), p.theta});
  }
  return traj;
}

}  // namespace irlvla::scene
