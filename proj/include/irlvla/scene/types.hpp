#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irlvla/scene/geometry.hpp"
#include "irlvla/scene/polyline.hpp"

namespace irlvla::scene {

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // heading in (-pi, pi]

  bool operator==(const Waypoint&) const = default;
};

// Waypoint i is the pose at time (i + 1) * dt; time 0 is the ego start state.
struct Trajectory {
  std::vector<Waypoint> waypoints;
  double dt = 0.5;

  std::size_t size() const { return waypoints.size(); }
  bool operator==(const Trajectory&) const = default;
};

struct EgoState {
  Waypoint pose;
  double speed = 0.0;
  double accel = 0.0;

  bool operator==(const EgoState&) const = default;
};

struct Footprint {
  double length = 4.6;
  double width = 1.9;

  bool operator==(const Footprint&) const = default;
};

// Non-reactive agent replay; poses[k] is the pose at time k * dt.
struct AgentTrack {
  Footprint footprint;
  std::vector<Waypoint> poses;

  bool operator==(const AgentTrack&) const = default;
};

enum class LightState { Green, Red };

struct TrafficLight {
  LightState state = LightState::Green;
  double stopline_s = 0.0;

  bool operator==(const TrafficLight&) const = default;
};

enum class Command { Follow, TurnLeft, TurnRight, Stop };
inline constexpr int kNumCommands = 4;

enum class Difficulty { Easy, Medium, Hard };

struct Scene {
  std::string id;
  std::uint64_t seed = 0;
  Difficulty difficulty = Difficulty::Easy;
  std::vector<Vec2> centerline;
  double corridor_halfwidth = 3.0;
  std::vector<AgentTrack> agents;
  std::optional<TrafficLight> light;
  EgoState ego0;
  Command command = Command::Follow;
  // Number of simulated instants, 0..sim_steps-1, each dt apart.
  int sim_steps = 9;
  double dt = 0.5;

  bool operator==(const Scene&) const = default;

  Polyline centerline_polyline() const { return Polyline(centerline); }
};

// Channel layout of the rasterized scene.
enum GridChannel : int {
  kDrivable = 0,
  kCenterlineOffset = 1,
  kOccupancy0 = 2,  // kOccupancy0 + bucket, bucket in [0, occupancy_buckets)
};

struct FeatureGrid {
  Vec2 origin;  // center of cell (0, 0)
  double cell = 0.5;
  int channels = 0;
  int rows = 0;  // along y
  int cols = 0;  // along x
  std::vector<double> data;  // [channel][row][col]

  int light_channel() const { return channels - 1; }
  double at(int c, int r, int col) const {
    return data[(static_cast<std::size_t>(c) * rows + r) * cols + col];
  }
  double& at(int c, int r, int col) {
    return data[(static_cast<std::size_t>(c) * rows + r) * cols + col];
  }
  Vec2 cell_center(int r, int col) const {
    return {origin.x + col * cell, origin.y + r * cell};
  }
};

struct SceneConfig {
  int horizon = 8;
  double dt = 0.5;
  Footprint ego_footprint{4.6, 1.9};
  double v_max = 25.0;
  double wheelbase = 2.7;
  double max_curvature = 0.2;
  double max_accel = 3.0;  // kinematic limit for the expert
  double max_jerk = 4.0;
  double grid_cell = 0.5;
  int occupancy_buckets = 4;
  double grid_padding = 5.0;
  double offset_clip = 5.0;

  // Expert controller.
  double expert_accel = 1.5;
  double expert_comfort_decel = 2.0;
  double expert_gap = 2.0;
  double expert_headway = 1.5;
  double expert_substep = 0.05;
  double yield_clearance = 1.5;  // seconds the expert keeps from crossing windows

  int sim_steps() const { return horizon + 1; }
};

std::string to_string(Difficulty d);
std::string to_string(Command c);
std::string to_string(LightState s);
Difficulty difficulty_from_string(const std::string& s);
Command command_from_string(const std::string& s);
LightState light_from_string(const std::string& s);

// Throws ShapeMismatch on violated Trajectory invariants.
void check_trajectory(const Trajectory& traj, const SceneConfig& cfg);

OrientedBox ego_box(const Waypoint& p, const Footprint& fp);

}  // namespace irlvla::scene
