#include "irlvla/scene/scene_io.hpp"

#include <fstream>

#include "irlvla/common/error.hpp"

namespace irlvla::scene {

using nlohmann::json;

json to_json(const Trajectory& t) {
  json wps = json::array();
  for (const auto& w : t.waypoints) wps.push_back({w.x, w.y, w.theta});
  return {{"dt", t.dt}, {"waypoints", wps}};
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.dt = j.at("dt").get<double>();
  for (const auto& w : j.at("waypoints")) {
    t.waypoints.push_back({w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()});
  }
  return t;
}

json to_json(const EgoState& e) {
  return {{"pose", {e.pose.x, e.pose.y, e.pose.theta}}, {"speed", e.speed}, {"accel", e.accel}};
}

EgoState ego_from_json(const json& j) {
  EgoState e;
  const auto& p = j.at("pose");
  e.pose = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
  e.speed = j.at("speed").get<double>();
  e.accel = j.at("accel").get<double>();
  return e;
}

json to_json(const Scene& s) {
  json cl = json::array();
  for (const auto& p : s.centerline) cl.push_back({p.x, p.y});
  json agents = json::array();
  for (const auto& a : s.agents) {
    json poses = json::array();
    for (const auto& p : a.poses) poses.push_back({p.x, p.y, p.theta});
    agents.push_back({{"length", a.footprint.length}, {"width", a.footprint.width}, {"poses", poses}});
  }
  json j = {{"id", s.id},
            {"seed", s.seed},
            {"difficulty", to_string(s.difficulty)},
            {"centerline", cl},
            {"corridor_halfwidth", s.corridor_halfwidth},
            {"agents", agents},
            {"ego0", to_json(s.ego0)},
            {"command", to_string(s.command)},
            {"sim_steps", s.sim_steps},
            {"dt", s.dt}};
  j["light"] = s.light ? json{{"state", to_string(s.light->state)},
                              {"stopline_s", s.light->stopline_s}}
                       : json(nullptr);
  return j;
}

Scene scene_from_json(const json& j) {
  Scene s;
  s.id = j.at("id").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
  for (const auto& p : j.at("centerline")) s.centerline.push_back({p.at(0), p.at(1)});
  s.corridor_halfwidth = j.at("corridor_halfwidth").get<double>();
  for (const auto& a : j.at("agents")) {
    AgentTrack t;
    t.footprint = {a.at("length").get<double>(), a.at("width").get<double>()};
    for (const auto& p : a.at("poses")) t.poses.push_back({p.at(0), p.at(1), p.at(2)});
    s.agents.push_back(std::move(t));
  }
  s.ego0 = ego_from_json(j.at("ego0"));
  s.command = command_from_string(j.at("command").get<std::string>());
  s.sim_steps = j.at("sim_steps").get<int>();
  s.dt = j.at("dt").get<double>();
  if (!j.at("light").is_null()) {
    const auto& l = j.at("light");
    s.light = TrafficLight{light_from_string(l.at("state")), l.at("stopline_s").get<double>()};
  }
  return s;
}

void write_scene_dataset(const std::string& path, const std::vector<SceneRecord>& records) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  for (const auto& r : records) {
    json line = {{"v", kDatasetVersion}, {"scene", to_json(r.scene)}};
    line["expert"] = r.expert ? to_json(*r.expert) : json(nullptr);
    out << line.dump() << '\n';
  }
}

std::vector<SceneRecord> read_scene_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingDataset, "scene dataset not found: " + path);
  std::vector<SceneRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (j.at("v").get<std::string>() != kDatasetVersion) {
      fail(ErrorCode::IoError, "unsupported dataset version in " + path);
    }
    SceneRecord r;
    r.scene = scene_from_json(j.at("scene"));
    if (!j.at("expert").is_null()) r.expert = trajectory_from_json(j.at("expert"));
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace irlvla::scene
