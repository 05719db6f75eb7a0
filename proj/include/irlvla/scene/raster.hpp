#pragma once

#include <vector>

#include "irlvla/scene/types.hpp"

namespace irlvla::scene {

// Channels: drivable mask, signed centerline offset (meters, clipped),
// one occupancy mask per future-step bucket, red-light region mask.
//
// Occupancy is marked in configuration space: a cell is occupied for bucket b
// when an ego footprint centered on the cell and aligned with the local
// centerline overlaps any agent footprint at a step in b.
FeatureGrid rasterize(const Scene& scene, const SceneConfig& cfg = {});

// Single-threaded reference for rasterize(); results are identical.
FeatureGrid rasterize_serial(const Scene& scene, const SceneConfig& cfg = {});

int occupancy_bucket(int step, int sim_steps, int buckets);

// Bilinear interpolation over channels; all-zero outside the grid.
std::vector<double> sample_feature(const FeatureGrid& grid, Vec2 point);
void sample_feature_into(const FeatureGrid& grid, Vec2 point, double* out);

}  // namespace irlvla::scene
