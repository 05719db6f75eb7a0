#include "irlvla/metrics/batch.hpp"

#include <exception>

namespace irlvla::metrics {

namespace {

MetricVector score_one(const ScoreJob& job, const MetricConfig& cfg) {
  ScoringOptions opts;
  opts.reference_progress = job.reference_progress;
  return score_trajectory(*job.traj, *job.scene, cfg, opts);
}

}  // namespace

std::vector<MetricVector> score_batch(const std::vector<ScoreJob>& jobs, const MetricConfig& cfg) {
  std::vector<MetricVector> out(jobs.size());
  std::exception_ptr error;
  const auto n = static_cast<long>(jobs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    try {
      out[i] = score_one(jobs[i], cfg);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<MetricVector> score_batch_serial(const std::vector<ScoreJob>& jobs,
                                             const MetricConfig& cfg) {
  std::vector<MetricVector> out;
  out.reserve(jobs.size());
  for (const auto& job : jobs) out.push_back(score_one(job, cfg));
  return out;
}

}  // namespace irlvla::metrics
