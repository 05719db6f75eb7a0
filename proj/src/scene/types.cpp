#include "irlvla/scene/types.hpp"

#include <cmath>
#include <numbers>

#include "irlvla/common/error.hpp"

namespace irlvla::scene {

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  return "easy";
}

std::string to_string(Command c) {
  switch (c) {
    case Command::Follow: return "follow";
    case Command::TurnLeft: return "turn_left";
    case Command::TurnRight: return "turn_right";
    case Command::Stop: return "stop";
  }
  return "follow";
}

std::string to_string(LightState s) { return s == LightState::Red ? "red" : "green"; }

Difficulty difficulty_from_string(const std::string& s) {
  if (s == "easy") return Difficulty::Easy;
  if (s == "medium") return Difficulty::Medium;
  if (s == "hard") return Difficulty::Hard;
  fail(ErrorCode::ConfigInvalid, "unknown difficulty '" + s + "'");
}

Command command_from_string(const std::string& s) {
  if (s == "follow") return Command::Follow;
  if (s == "turn_left") return Command::TurnLeft;
  if (s == "turn_right") return Command::TurnRight;
  if (s == "stop") return Command::Stop;
  fail(ErrorCode::ConfigInvalid, "unknown command '" + s + "'");
}

LightState light_from_string(const std::string& s) {
  if (s == "red") return LightState::Red;
  if (s == "green") return LightState::Green;
  fail(ErrorCode::ConfigInvalid, "unknown light state '" + s + "'");
}

void check_trajectory(const Trajectory& traj, const SceneConfig& cfg) {
  if (static_cast<int>(traj.size()) != cfg.horizon) {
    fail(ErrorCode::ShapeMismatch, "trajectory length " + std::to_string(traj.size()) +
                                       " != horizon " + std::to_string(cfg.horizon));
  }
  if (!(traj.dt > 0.0)) fail(ErrorCode::ShapeMismatch, "trajectory dt must be positive");
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& w = traj.waypoints[i];
    if (!std::isfinite(w.x) || !std::isfinite(w.y) || !std::isfinite(w.theta)) {
      fail(ErrorCode::ShapeMismatch, "non-finite waypoint");
    }
    if (w.theta <= -std::numbers::pi || w.theta > std::numbers::pi) {
      fail(ErrorCode::ShapeMismatch, "heading outside (-pi, pi]");
    }
    if (i > 0) {
      const auto& p = traj.waypoints[i - 1];
      // Small slack absorbs rounding in the speed cap projection.
      if (std::hypot(w.x - p.x, w.y - p.y) > cfg.v_max * traj.dt * (1.0 + 1e-9)) {
        fail(ErrorCode::ShapeMismatch, "waypoint spacing exceeds v_max");
      }
    }
  }
}

OrientedBox ego_box(const Waypoint& p, const Footprint& fp) {
  return OrientedBox{{p.x, p.y}, p.theta, fp.length, fp.width};
}

}  // namespace irlvla::scene
