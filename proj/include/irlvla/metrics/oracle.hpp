#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "irlvla/scene/types.hpp"

namespace irlvla::metrics {

enum class Metric { NC, DAC, DDC, TLC, EP, TTC, LK, HC, EC };

// The eight sub-scores the reward model predicts (EC is excluded there).
inline constexpr std::array<Metric, 8> kRewardMetrics = {
    Metric::NC, Metric::DAC, Metric::DDC, Metric::TLC,
    Metric::EP, Metric::TTC, Metric::LK,  Metric::HC};
inline constexpr std::array<Metric, 4> kPenaltyMetrics = {Metric::NC, Metric::DAC, Metric::DDC,
                                                          Metric::TLC};

std::string_view metric_name(Metric m);

enum class MetricKind { Binary, ThreeWay, Continuous };
MetricKind metric_kind(Metric m);

// Legal domains: NC, DDC in {0, 0.5, 1}; EP in [0, 1]; everything else {0, 1}.
struct MetricVector {
  double nc = 1.0;
  double dac = 1.0;
  double ddc = 1.0;
  double tlc = 1.0;
  double ep = 1.0;
  double ttc = 1.0;
  double lk = 1.0;
  double hc = 1.0;
  std::optional<double> ec;

  double get(Metric m) const;
  void set(Metric m, double value);
  bool operator==(const MetricVector&) const = default;
};

bool in_domain(Metric m, double value);

// A human (expert) value that fails metric m waives the agent's value for m.
bool is_failing(Metric m, double value);

struct EpdmsWeights {
  double ttc = 5.0;
  double ep = 5.0;
  double hc = 2.0;
  double lk = 2.0;
  double ec = 2.0;
  bool ec_enabled = false;
};

struct MetricConfig {
  scene::Footprint ego_footprint{4.6, 1.9};
  double at_fault_speed = 0.1;     // m/s; slower egos are never at fault
  double ddc_tolerance = 0.1;      // m of total reversal still counted as compliant
  double ddc_partial = 2.0;        // m of total reversal that still earns 0.5
  double ttc_horizon = 1.0;        // s
  double ttc_step = 0.1;           // s
  double lk_max_offset = 0.75;     // m
  double hc_max_accel = 3.0;       // m/s^2
  double hc_max_jerk = 5.0;        // m/s^3
  double ep_min_progress = 1.0;    // m; below this the reference imposes no EP penalty
  double ec_accel_tolerance = 1.0; // m/s^2
  double ec_jerk_tolerance = 2.0;  // m/s^3
};

struct ScoringOptions {
  // Expert centerline progress used as the EP denominator; computed from the
  // expert when absent.
  std::optional<double> reference_progress;
  // When set, EC is evaluated against this second-run trajectory.
  const scene::Trajectory* ec_pair = nullptr;
};

// Per-step kinematic profile of a trajectory with the ego start state
// prepended as instant 0.
struct Kinematics {
  std::vector<scene::Waypoint> poses;  // l + 1 poses
  std::vector<scene::Vec2> velocity;   // l + 1 velocity vectors
  std::vector<double> speed;
  std::vector<double> accel;
  std::vector<double> jerk;            // jerk[0] is 0
};

Kinematics compute_kinematics(const scene::Trajectory& traj, const scene::EgoState& ego0);

// Signed centerline progress of the final waypoint relative to the ego start.
double centerline_progress(const scene::Trajectory& traj, const scene::Scene& scene);

// Throws HorizonMismatch when the trajectory outlasts the scene's agent tracks.
MetricVector score_trajectory(const scene::Trajectory& traj, const scene::Scene& scene,
                              const MetricConfig& cfg = {}, const ScoringOptions& opts = {});

double aggregate_epdms(const MetricVector& agent, const MetricVector& human,
                       const EpdmsWeights& weights = {});

struct ComfortStats {
  double peak_accel = 0.0;
  double peak_jerk = 0.0;
};
ComfortStats comfort_stats(const scene::Trajectory& traj);

// 1 iff the two runs' peak |accel| and peak |jerk| agree within tolerance.
double score_ec(const scene::Trajectory& a, const scene::Trajectory& b,
                const MetricConfig& cfg = {});

}  // namespace irlvla::metrics
