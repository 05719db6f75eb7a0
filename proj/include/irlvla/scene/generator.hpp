#pragma once

#include <cstdint>

#include "irlvla/scene/types.hpp"

namespace irlvla::scene {

// Pure function of (seed, difficulty, cfg). Easy scenes are an empty straight
// road; Medium adds curvature, an optional lead vehicle and an optional light;
// Hard always carries a light and at least one agent crossing the corridor.
Scene generate_scene(std::uint64_t seed, Difficulty difficulty, const SceneConfig& cfg = {});

// True when any pose of the track lies inside the corridor band.
bool track_enters_corridor(const Scene& scene, const AgentTrack& track);

// Agents whose heading is transverse to the local centerline direction.
bool is_crossing_agent(const Scene& scene, const AgentTrack& track);

}  // namespace irlvla::scene
