#pragma once

#include <optional>
#include <vector>

#include "irlvla/metrics/oracle.hpp"

namespace irlvla::metrics {

struct ScoreJob {
  const scene::Scene* scene = nullptr;
  const scene::Trajectory* traj = nullptr;
  std::optional<double> reference_progress;
};

// Scores independent jobs with OpenMP; output order matches input order.
std::vector<MetricVector> score_batch(const std::vector<ScoreJob>& jobs,
                                      const MetricConfig& cfg = {});

// Single-threaded reference for score_batch().
std::vector<MetricVector> score_batch_serial(const std::vector<ScoreJob>& jobs,
                                             const MetricConfig& cfg = {});

}  // namespace irlvla::metrics
