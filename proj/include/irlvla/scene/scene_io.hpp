#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "irlvla/scene/types.hpp"

namespace irlvla::scene {

inline constexpr const char* kDatasetVersion = "v1";

nlohmann::json to_json(const Trajectory& t);
nlohmann::json to_json(const EgoState& e);
nlohmann::json to_json(const Scene& s);
Trajectory trajectory_from_json(const nlohmann::json& j);
EgoState ego_from_json(const nlohmann::json& j);
Scene scene_from_json(const nlohmann::json& j);

// One line per scene: {"v": "v1", "scene": {...}, "expert": {...} | null}.
struct SceneRecord {
  Scene scene;
  std::optional<Trajectory> expert;  // absent when the expert was infeasible
};

void write_scene_dataset(const std::string& path, const std::vector<SceneRecord>& records);
std::vector<SceneRecord> read_scene_dataset(const std::string& path);

}  // namespace irlvla::scene
