#pragma once

#include "irlvla/diffgraph/mlp.hpp"
#include "irlvla/scene/types.hpp"

namespace irlvla::rwm {

// Layout of f_traj, in order:
//   grid block     horizon x channels   raster sampled at each waypoint
//   step block     horizon x kStepFeatures
//                  speed/10, accel/3, jerk/5, heading error vs centerline,
//                  lateral offset/2, worst corner margin to corridor edge/2,
//                  centerline advance/5, red stopline margin, nearest agent
//                  (longitudinal/10, lateral/5, distance/10), and the nearest
//                  agent distance/10 under a constant-velocity projection at
//                  0.5 s and 1.0 s
//   summary        kSummaryFeatures: v0/10, a0/3, peak |accel|/3, peak |jerk|/5,
//                  path length/40, progress/40, total reversal/2
//   context        kContextPoints x (buckets + 1): occupancy and red mask
//                  along the centerline ahead of the ego start
inline constexpr int kStepFeatures = 13;
inline constexpr int kSummaryFeatures = 7;
inline constexpr int kContextPoints = 12;
inline constexpr double kContextSpacing = 5.0;

int traj_feature_size(const scene::SceneConfig& cfg);
int grid_block_size(const scene::SceneConfig& cfg);

// Throws HorizonMismatch when the trajectory horizon differs from cfg.horizon
// or outlasts the scene's agent tracks.
diffgraph::Vector extract_traj_feature(const scene::Scene& scene, const scene::FeatureGrid& grid,
                                       const scene::Trajectory& traj,
                                       const scene::SceneConfig& cfg = {});

}  // namespace irlvla::rwm
