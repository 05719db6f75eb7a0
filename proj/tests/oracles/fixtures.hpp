#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "irlvla/anchors/kmeans.hpp"
#include "irlvla/scene/types.hpp"

namespace irlvla::testkit {

// Straight road along +x through the origin, ego at the origin heading +x.
scene::Scene straight_scene(double speed = 10.0, double halfwidth = 3.0);

// Agent whose pose at step k is pose(k).
void add_agent(scene::Scene& s, const std::function<scene::Waypoint(int)>& pose,
               scene::Footprint fp = {4.6, 1.9});

// Waypoints at constant speed along +x from the scene's ego pose.
scene::Trajectory straight_traj(const scene::Scene& s, double speed, double lateral = 0.0);

struct RandomPair {
  scene::Scene scene;
  scene::Trajectory traj;
  double reference_progress = 0.0;
  std::string kind;
};

// Mixed generator: library scenes of every difficulty with expert, noisy,
// shifted, reversing, stationary and random-control trajectories.
RandomPair random_pair(std::uint64_t seed);

std::string temp_dir(const std::string& name);

// K smooth forward-driving ego-frame trajectories, 8 waypoints at 0.5 s.
anchors::AnchorSet toy_anchors(int K, std::uint64_t seed);

}  // namespace irlvla::testkit
