#include "irlvla/metrics/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "irlvla/common/error.hpp"
#include "irlvla/scene/expert.hpp"
#include "irlvla/scene/polyline.hpp"

namespace irlvla::metrics {

using scene::OrientedBox;
using scene::Polyline;
using scene::Vec2;

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::NC: return "NC";
    case Metric::DAC: return "DAC";
    case Metric::DDC: return "DDC";
    case Metric::TLC: return "TLC";
    case Metric::EP: return "EP";
    case Metric::TTC: return "TTC";
    case Metric::LK: return "LK";
    case Metric::HC: return "HC";
    case Metric::EC: return "EC";
  }
  return "?";
}

MetricKind metric_kind(Metric m) {
  switch (m) {
    case Metric::NC:
    case Metric::DDC: return MetricKind::ThreeWay;
    case Metric::EP: return MetricKind::Continuous;
    default: return MetricKind::Binary;
  }
}

double MetricVector::get(Metric m) const {
  switch (m) {
    case Metric::NC: return nc;
    case Metric::DAC: return dac;
    case Metric::DDC: return ddc;
    case Metric::TLC: return tlc;
    case Metric::EP: return ep;
    case Metric::TTC: return ttc;
    case Metric::LK: return lk;
    case Metric::HC: return hc;
    case Metric::EC: return ec.value_or(1.0);
  }
  return 0.0;
}

void MetricVector::set(Metric m, double value) {
  switch (m) {
    case Metric::NC: nc = value; break;
    case Metric::DAC: dac = value; break;
    case Metric::DDC: ddc = value; break;
    case Metric::TLC: tlc = value; break;
    case Metric::EP: ep = value; break;
    case Metric::TTC: ttc = value; break;
    case Metric::LK: lk = value; break;
    case Metric::HC: hc = value; break;
    case Metric::EC: ec = value; break;
  }
}

bool in_domain(Metric m, double v) {
  switch (metric_kind(m)) {
    case MetricKind::ThreeWay: return v == 0.0 || v == 0.5 || v == 1.0;
    case MetricKind::Binary: return v == 0.0 || v == 1.0;
    case MetricKind::Continuous: return v >= 0.0 && v <= 1.0;
  }
  return false;
}

bool is_failing(Metric m, double value) {
  if (metric_kind(m) == MetricKind::Continuous) return value <= 0.0;
  return value < 1.0;
}

Kinematics compute_kinematics(const scene::Trajectory& traj, const scene::EgoState& ego0) {
  Kinematics k;
  const std::size_t n = traj.size() + 1;
  k.poses.reserve(n);
  k.poses.push_back(ego0.pose);
  k.poses.insert(k.poses.end(), traj.waypoints.begin(), traj.waypoints.end());
  k.velocity.resize(n);
  k.speed.resize(n);
  k.accel.resize(n);
  k.jerk.assign(n, 0.0);
  k.velocity[0] = scene::heading_vector(ego0.pose.theta) * ego0.speed;
  k.speed[0] = ego0.speed;
  k.accel[0] = ego0.accel;
  for (std::size_t i = 1; i < n; ++i) {
    const Vec2 d{k.poses[i].x - k.poses[i - 1].x, k.poses[i].y - k.poses[i - 1].y};
    k.velocity[i] = d * (1.0 / traj.dt);
    k.speed[i] = scene::norm(d) / traj.dt;
    k.accel[i] = (k.speed[i] - k.speed[i - 1]) / traj.dt;
    k.jerk[i] = (k.accel[i] - k.accel[i - 1]) / traj.dt;
  }
  return k;
}

double centerline_progress(const scene::Trajectory& traj, const scene::Scene& scene) {
  const Polyline cl(scene.centerline);
  const double s0 = cl.project({scene.ego0.pose.x, scene.ego0.pose.y}).s;
  if (traj.waypoints.empty()) return 0.0;
  const auto& last = traj.waypoints.back();
  return cl.project({last.x, last.y}).s - s0;
}

namespace {

// Agent velocity at step k by forward difference (backward at the last step).
Vec2 agent_velocity(const scene::AgentTrack& a, std::size_t k, double dt) {
  const std::size_t n = a.poses.size();
  if (n < 2) return {0.0, 0.0};
  const std::size_t i0 = k + 1 < n ? k : n - 2;
  return Vec2{a.poses[i0 + 1].x - a.poses[i0].x, a.poses[i0 + 1].y - a.poses[i0].y} *
         (1.0 / dt);
}

OrientedBox agent_box(const scene::AgentTrack& a, std::size_t k) {
  const auto& p = a.poses[k];
  return OrientedBox{{p.x, p.y}, p.theta, a.footprint.length, a.footprint.width};
}

}  // namespace

MetricVector score_trajectory(const scene::Trajectory& traj, const scene::Scene& scene,
                              const MetricConfig& cfg, const ScoringOptions& opts) {
  const std::size_t steps = traj.size() + 1;
  for (const auto& agent : scene.agents) {
    if (agent.poses.size() < steps) {
      fail(ErrorCode::HorizonMismatch,
           "trajectory needs " + std::to_string(steps) + " sim steps, agent track has " +
               std::to_string(agent.poses.size()));
    }
  }
  if (static_cast<int>(steps) > scene.sim_steps) {
    fail(ErrorCode::HorizonMismatch, "trajectory horizon exceeds scene sim horizon");
  }

  const Polyline cl(scene.centerline);
  const Kinematics kin = compute_kinematics(traj, scene.ego0);
  const double half_len = 0.5 * cfg.ego_footprint.length;
  MetricVector out;

  std::vector<scene::Projection> proj(steps);
  for (std::size_t k = 0; k < steps; ++k) proj[k] = cl.project({kin.poses[k].x, kin.poses[k].y});

  // NC: worst collision outcome over all (step, agent) overlaps.
  for (std::size_t k = 1; k < steps && out.nc > 0.0; ++k) {
    const OrientedBox ego = scene::ego_box(kin.poses[k], cfg.ego_footprint);
    for (const auto& agent : scene.agents) {
      const OrientedBox other = agent_box(agent, k);
      if (!scene::boxes_overlap(ego, other)) continue;
      const double rel_long =
          scene::dot(other.center - ego.center, scene::heading_vector(ego.heading));
      const bool not_at_fault = kin.speed[k] < cfg.at_fault_speed || rel_long < 0.0;
      out.nc = std::min(out.nc, not_at_fault ? 0.5 : 0.0);
    }
  }

  // DAC: every footprint corner within the corridor at every waypoint.
  for (std::size_t k = 1; k < steps && out.dac > 0.0; ++k) {
    for (const Vec2& c : scene::ego_box(kin.poses[k], cfg.ego_footprint).corners()) {
      if (cl.project(c).distance > scene.corridor_halfwidth) {
        out.dac = 0.0;
        break;
      }
    }
  }

  // DDC: total backwards travel along the centerline.
  double reverse = 0.0;
  for (std::size_t k = 1; k < steps; ++k) reverse += std::max(0.0, proj[k - 1].s - proj[k].s);
  out.ddc = reverse <= cfg.ddc_tolerance ? 1.0 : (reverse < cfg.ddc_partial ? 0.5 : 0.0);

  // TLC: the front bumper may not pass a red stopline it started behind.
  if (scene.light && scene.light->state == scene::LightState::Red) {
    const double stop = scene.light->stopline_s;
    if (proj[0].s + half_len <= stop) {
      for (std::size_t k = 1; k < steps; ++k) {
        if (proj[k].s + half_len > stop) {
          out.tlc = 0.0;
          break;
        }
      }
    }
  }

  // EP: progress relative to the expert, clamped.
  const double progress = proj[steps - 1].s - proj[0].s;
  double reference = 0.0;
  if (opts.reference_progress) {
    reference = *opts.reference_progress;
  } else {
    reference = centerline_progress(scene::expert_trajectory(scene), scene);
  }
  out.ep = reference < cfg.ep_min_progress ? 1.0 : std::clamp(progress / reference, 0.0, 1.0);

  // TTC: constant-velocity projection of ego and agents over the TTC window.
  const int ttc_samples = static_cast<int>(std::lround(cfg.ttc_horizon / cfg.ttc_step));
  for (std::size_t k = 1; k < steps && out.ttc > 0.0; ++k) {
    const Vec2 ev = kin.velocity[k];
    for (const auto& agent : scene.agents) {
      const Vec2 av = agent_velocity(agent, k, traj.dt);
      const OrientedBox a0 = agent_box(agent, k);
      bool hit = false;
      for (int j = 0; j <= ttc_samples && !hit; ++j) {
        const double t = j * cfg.ttc_step;
        OrientedBox ego = scene::ego_box(kin.poses[k], cfg.ego_footprint);
        ego.center = ego.center + ev * t;
        OrientedBox other = a0;
        other.center = other.center + av * t;
        hit = scene::boxes_overlap(ego, other);
      }
      if (hit) {
        out.ttc = 0.0;
        break;
      }
    }
  }

  for (std::size_t k = 1; k < steps; ++k) {
    if (std::abs(proj[k].lateral) > cfg.lk_max_offset) {
      out.lk = 0.0;
      break;
    }
  }

  for (std::size_t k = 1; k < steps; ++k) {
    if (std::abs(kin.accel[k]) > cfg.hc_max_accel || std::abs(kin.jerk[k]) > cfg.hc_max_jerk) {
      out.hc = 0.0;
      break;
    }
  }

  if (opts.ec_pair != nullptr) out.ec = score_ec(traj, *opts.ec_pair, cfg);
  return out;
}

double aggregate_epdms(const MetricVector& agent, const MetricVector& human,
                       const EpdmsWeights& weights) {
  auto filtered = [&](Metric m) {
    return is_failing(m, human.get(m)) ? 1.0 : agent.get(m);
  };
  double penalty = 1.0;
  for (Metric m : kPenaltyMetrics) penalty *= filtered(m);

  double num = weights.ttc * filtered(Metric::TTC) + weights.ep * filtered(Metric::EP) +
               weights.hc * filtered(Metric::HC) + weights.lk * filtered(Metric::LK);
  double den = weights.ttc + weights.ep + weights.hc + weights.lk;
  if (weights.ec_enabled && agent.ec && human.ec) {
    num += weights.ec * filtered(Metric::EC);
    den += weights.ec;
  }
  return penalty * (num / den);
}

ComfortStats comfort_stats(const scene::Trajectory& traj) {
  ComfortStats s;
  const auto& w = traj.waypoints;
  std::vector<double> speed;
  for (std::size_t i = 1; i < w.size(); ++i) {
    speed.push_back(std::hypot(w[i].x - w[i - 1].x, w[i].y - w[i - 1].y) / traj.dt);
  }
  std::vector<double> accel;
  for (std::size_t i = 1; i < speed.size(); ++i) {
    accel.push_back((speed[i] - speed[i - 1]) / traj.dt);
    s.peak_accel = std::max(s.peak_accel, std::abs(accel.back()));
  }
  for (std::size_t i = 1; i < accel.size(); ++i) {
    s.peak_jerk = std::max(s.peak_jerk, std::abs((accel[i] - accel[i - 1]) / traj.dt));
  }
  return s;
}

double score_ec(const scene::Trajectory& a, const scene::Trajectory& b, const MetricConfig& cfg) {
  const ComfortStats sa = comfort_stats(a);
  const ComfortStats sb = comfort_stats(b);
  const bool ok = std::abs(sa.peak_accel - sb.peak_accel) < cfg.ec_accel_tolerance &&
                  std::abs(sa.peak_jerk - sb.peak_jerk) < cfg.ec_jerk_tolerance;
  return ok ? 1.0 : 0.0;
}

}  // namespace irlvla::metrics
