#pragma once

#include "irlvla/scene/types.hpp"

namespace irlvla::scene {

// Rule-based demonstrator: pure pursuit on the centerline with an IDM-style
// longitudinal law that follows leads, stops at red stoplines and yields to
// crossing agents. Throws ExpertInfeasible when no candidate plan is free of
// collisions, TTC violations, red-light crossings and comfort violations.
Trajectory expert_trajectory(const Scene& scene, const SceneConfig& cfg = {});

// Constant-velocity straight-line baseline from the ego start state.
Trajectory constant_velocity_trajectory(const Scene& scene, const SceneConfig& cfg = {});

}  // namespace irlvla::scene
