#include "irlvla/anchors/kmeans.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"
#include "irlvla/scene/geometry.hpp"

namespace irlvla::anchors {

using scene::Trajectory;

double squared_distance(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) fail(ErrorCode::HorizonMismatch, "trajectory horizons differ");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dx = a.waypoints[i].x - b.waypoints[i].x;
    const double dy = a.waypoints[i].y - b.waypoints[i].y;
    d += dx * dx + dy * dy;
  }
  return d;
}

namespace {

std::size_t nearest(const Trajectory& t, const std::vector<Trajectory>& centers, double* dist) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const double d = squared_distance(t, centers[k]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

}  // namespace

AnchorSet kmeans_fit(const std::vector<Trajectory>& demos, int K, std::uint64_t seed,
                     const KMeansOptions& opts) {
  if (K <= 0 || demos.size() < static_cast<std::size_t>(K)) {
    fail(ErrorCode::TooFewDemos, "k-means needs at least K=" + std::to_string(K) +
                                     " demos, got " + std::to_string(demos.size()));
  }
  const std::size_t l = demos.front().size();
  const double dt = demos.front().dt;
  for (const auto& d : demos) {
    if (d.size() != l || d.dt != dt) fail(ErrorCode::HorizonMismatch, "demos must share l and dt");
  }

  // Farthest-point seeding.
  Rng rng(mix_seed(seed, 0x6b6d));
  std::vector<Trajectory> centers;
  centers.push_back(demos[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(demos.size()) - 1))]);
  std::vector<double> min_d(demos.size(), std::numeric_limits<double>::infinity());
  while (centers.size() < static_cast<std::size_t>(K)) {
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < demos.size(); ++i) {
      min_d[i] = std::min(min_d[i], squared_distance(demos[i], centers.back()));
      if (min_d[i] > far_d) {
        far_d = min_d[i];
        far = i;
      }
    }
    centers.push_back(demos[far]);
  }

  AnchorSet out;
  out.K = K;
  out.seed = seed;
  out.num_demos = demos.size();
  std::vector<std::size_t> labels(demos.size(), std::numeric_limits<std::size_t>::max());
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < demos.size(); ++i) {
      const std::size_t k = nearest(demos[i], centers, nullptr);
      if (k != labels[i]) {
        labels[i] = k;
        changed = true;
      }
    }
    out.iterations = iter + 1;
    if (!changed && iter > 0) break;

    // Update step; empty clusters keep their previous centroid.
    std::vector<Trajectory> sums(K);
    std::vector<std::vector<double>> sin_sum(K, std::vector<double>(l, 0.0));
    std::vector<std::vector<double>> cos_sum(K, std::vector<double>(l, 0.0));
    std::vector<int> counts(K, 0);
    for (auto& s : sums) {
      s.dt = dt;
      s.waypoints.assign(l, {});
    }
    for (std::size_t i = 0; i < demos.size(); ++i) {
      const std::size_t k = labels[i];
      ++counts[k];
      for (std::size_t j = 0; j < l; ++j) {
        const auto& w = demos[i].waypoints[j];
        sums[k].waypoints[j].x += w.x;
        sums[k].waypoints[j].y += w.y;
        sin_sum[k][j] += std::sin(w.theta);
        cos_sum[k][j] += std::cos(w.theta);
      }
    }
    for (int k = 0; k < K; ++k) {
      if (counts[k] == 0) continue;
      for (std::size_t j = 0; j < l; ++j) {
        auto& c = centers[k].waypoints[j];
        c.x = sums[k].waypoints[j].x / counts[k];
        c.y = sums[k].waypoints[j].y / counts[k];
        c.theta = scene::wrap_angle(std::atan2(sin_sum[k][j], cos_sum[k][j]));
      }
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < demos.size(); ++i) {
      inertia += squared_distance(demos[i], centers[labels[i]]);
    }
    out.inertia_log.push_back(inertia);
  }
  out.anchors = std::move(centers);
  return out;
}

std::size_t assign(const Trajectory& traj, const AnchorSet& anchors) {
  return nearest(traj, anchors.anchors, nullptr);
}

nlohmann::json to_json(const AnchorSet& set) {
  nlohmann::json anchors = nlohmann::json::array();
  for (const auto& a : set.anchors) {
    nlohmann::json wps = nlohmann::json::array();
    for (const auto& w : a.waypoints) wps.push_back({w.x, w.y, w.theta});
    anchors.push_back(wps);
  }
  return {{"version", "v1"},
          {"K", set.K},
          {"seed", set.seed},
          {"created", {{"num_demos", set.num_demos},
                       {"iterations", set.iterations},
                       {"inertia_log", set.inertia_log},
                       {"method", "kmeans-farthest-point"}}},
          {"dt", set.anchors.empty() ? 0.0 : set.anchors.front().dt},
          {"anchors", anchors}};
}

AnchorSet anchor_set_from_json(const nlohmann::json& j) {
  AnchorSet s;
  s.K = j.at("K").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  const auto& created = j.at("created");
  s.num_demos = created.at("num_demos").get<std::size_t>();
  s.iterations = created.at("iterations").get<int>();
  s.inertia_log = created.at("inertia_log").get<std::vector<double>>();
  const double dt = j.at("dt").get<double>();
  for (const auto& a : j.at("anchors")) {
    Trajectory t;
    t.dt = dt;
    for (const auto& w : a) t.waypoints.push_back({w.at(0), w.at(1), w.at(2)});
    s.anchors.push_back(std::move(t));
  }
  return s;
}

void save_anchor_set(const std::string& path, const AnchorSet& set) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << to_json(set).dump(1) << '\n';
}

AnchorSet load_anchor_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingDataset, "anchor set not found: " + path);
  return anchor_set_from_json(nlohmann::json::parse(in));
}

}  // namespace irlvla::anchors
