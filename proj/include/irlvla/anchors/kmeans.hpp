#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "irlvla/scene/types.hpp"

namespace irlvla::anchors {

// Anchor trajectories are expressed in the ego frame at t = 0.
struct AnchorSet {
  std::vector<scene::Trajectory> anchors;
  int K = 0;
  std::uint64_t seed = 0;
  std::size_t num_demos = 0;
  int iterations = 0;
  std::vector<double> inertia_log;  // within-cluster sum of squares per Lloyd iteration

  std::size_t size() const { return anchors.size(); }
};

struct KMeansOptions {
  int max_iter = 100;
};

// Lloyd iterations from farthest-point seeding. Distance is Euclidean over the
// flattened (x, y) coordinates; centroid headings are circular means of the
// member headings. Throws TooFewDemos when |demos| < K.
AnchorSet kmeans_fit(const std::vector<scene::Trajectory>& demos, int K, std::uint64_t seed,
                     const KMeansOptions& opts = {});

// Nearest anchor under the same (x, y) metric; ties go to the lowest index.
std::size_t assign(const scene::Trajectory& traj, const AnchorSet& anchors);

double squared_distance(const scene::Trajectory& a, const scene::Trajectory& b);

nlohmann::json to_json(const AnchorSet& set);
AnchorSet anchor_set_from_json(const nlohmann::json& j);
void save_anchor_set(const std::string& path, const AnchorSet& set);
AnchorSet load_anchor_set(const std::string& path);

}  // namespace irlvla::anchors
