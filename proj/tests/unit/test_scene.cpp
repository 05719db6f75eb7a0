#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "fixtures.hpp"
#include "brute_metrics.hpp"
#include "irlvla/common/error.hpp"
#include "irlvla/metrics/oracle.hpp"
#include "irlvla/scene/expert.hpp"
#include "irlvla/scene/generator.hpp"
#include "irlvla/scene/raster.hpp"
#include "irlvla/scene/scene_io.hpp"

using namespace irlvla;
using namespace irlvla::scene;

TEST_SUITE("scene") {

TEST_CASE("easy scene is an empty straight road") {
  const Scene s = generate_scene(0, Difficulty::Easy);
  CHECK(s.agents.empty());
  CHECK_FALSE(s.light.has_value());
  const auto& cl = s.centerline;
  REQUIRE(cl.size() >= 2);
  const double h = std::atan2(cl[1].y - cl[0].y, cl[1].x - cl[0].x);
  for (std::size_t i = 1; i + 1 < cl.size(); ++i) {
    CHECK(std::atan2(cl[i + 1].y - cl[i].y, cl[i + 1].x - cl[i].x) == doctest::Approx(h).epsilon(1e-9));
  }
}

TEST_CASE("hard scenes carry a light and a track that crosses the corridor") {
  for (std::uint64_t seed : {7ull, 8ull, 9ull, 123ull}) {
    const Scene s = generate_scene(seed, Difficulty::Hard);
    CHECK(s.light.has_value());
    bool crossing = false;
    for (const auto& a : s.agents) {
      // Brute geometric test: some pose of the track lies inside the corridor band
      // while the track starts outside it.
      bool in = false;
      for (const auto& p : a.poses) {
        in = in || std::abs(testkit::nearest_on_centerline(s.centerline, {p.x, p.y}).signed_distance) <=
                       s.corridor_halfwidth;
      }
      crossing = crossing || (in && is_crossing_agent(s, a));
    }
    CHECK(crossing);
  }
}

TEST_CASE("generation is a pure function of seed and difficulty") {
  for (auto d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard}) {
    CHECK(generate_scene(42, d) == generate_scene(42, d));
    CHECK(to_json(generate_scene(42, d)).dump() == to_json(generate_scene(42, d)).dump());
  }
  CHECK_FALSE(generate_scene(1, Difficulty::Hard) == generate_scene(2, Difficulty::Hard));
}

TEST_CASE("scene invariants") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Scene s = generate_scene(seed, static_cast<Difficulty>(seed % 3));
    REQUIRE(s.centerline.size() >= 2);
    for (std::size_t i = 1; i < s.centerline.size(); ++i) {
      CHECK(norm(s.centerline[i] - s.centerline[i - 1]) > 0.0);
    }
    CHECK(s.corridor_halfwidth > 0.5 * SceneConfig{}.ego_footprint.width);
    CHECK(s.ego0.speed >= 0.0);
    CHECK(s.centerline_polyline().project({s.ego0.pose.x, s.ego0.pose.y}).distance < 1e-9);
    for (const auto& a : s.agents) {
      CHECK(a.poses.size() == static_cast<std::size_t>(s.sim_steps));
      CHECK(a.footprint.length > 0.0);
      CHECK(a.footprint.width > 0.0);
    }
  }
}

TEST_CASE("expert on empty straight green road keeps speed on the centerline") {
  const Scene s = testkit::straight_scene(10.0);
  const Trajectory t = expert_trajectory(s);
  REQUIRE(t.size() == 8);
  for (std::size_t k = 0; k < t.size(); ++k) {
    CHECK(t.waypoints[k].y == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(t.waypoints[k].x == doctest::Approx(10.0 * 0.5 * (k + 1)).epsilon(1e-6));
  }
}

TEST_CASE("expert stops before a red stopline") {
  Scene s = testkit::straight_scene(5.0);
  const double s0 = s.centerline_polyline().project({0, 0}).s;
  const double stop = s0 + 16.0;
  s.light = TrafficLight{LightState::Red, stop};
  const Trajectory t = expert_trajectory(s);
  const double half = 0.5 * SceneConfig{}.ego_footprint.length;
  for (const auto& w : t.waypoints) CHECK(s.centerline_polyline().project({w.x, w.y}).s + half <= stop);
  const double last = std::hypot(t.waypoints[7].x - t.waypoints[6].x, t.waypoints[7].y - t.waypoints[6].y);
  CHECK(last / t.dt < 0.25 * 5.0);  // creeping up to the line by the end of the horizon
  metrics::ScoringOptions o;
  o.reference_progress = metrics::centerline_progress(t, s);
  CHECK(metrics::score_trajectory(t, s, {}, o).tlc == 1.0);
}

TEST_CASE("expert yields to a crossing agent") {
  Scene s = testkit::straight_scene(8.0);
  // Agent crosses the road 25 m ahead between t = 1 s and t = 3 s.
  testkit::add_agent(s, [](int k) {
    const double t = 0.5 * k;
    return Waypoint{25.0, -12.0 + 6.0 * t, std::numbers::pi / 2};
  });
  const Trajectory t = expert_trajectory(s);
  metrics::ScoringOptions o;
  o.reference_progress = metrics::centerline_progress(t, s);
  const auto m = metrics::score_trajectory(t, s, {}, o);
  CHECK(m.ttc == 1.0);
  CHECK(m.nc == 1.0);
}

TEST_CASE("experts score well on their own scenes and respect limits") {
  const SceneConfig cfg;
  int feasible = 0;
  for (std::uint64_t seed = 0; seed < 90; ++seed) {
    const Scene s = generate_scene(seed, static_cast<Difficulty>(seed % 3));
    Trajectory t;
    try {
      t = expert_trajectory(s);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ExpertInfeasible);
      continue;
    }
    ++feasible;
    CHECK_NOTHROW(check_trajectory(t, cfg));
    metrics::ScoringOptions o;
    o.reference_progress = metrics::centerline_progress(t, s);
    const auto m = metrics::score_trajectory(t, s, {}, o);
    CHECK(metrics::aggregate_epdms(m, m) >= 0.9);
    const auto st = metrics::comfort_stats(t);
    CHECK(st.peak_accel <= cfg.max_accel + 1e-9);
  }
  CHECK(feasible >= 80);
}

TEST_CASE("empty road has no occupancy") {
  const Scene s = generate_scene(3, Difficulty::Easy);
  const FeatureGrid g = rasterize(s);
  for (int b = 0; b < 4; ++b) {
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) CHECK_EQ(g.at(kOccupancy0 + b, r, c), 0.0);
    }
  }
}

TEST_CASE("drivable mask matches a brute point-in-corridor test") {
  const Scene s = generate_scene(11, Difficulty::Medium);
  const FeatureGrid g = rasterize(s);
  int checked = 0;
  for (int r = 0; r < g.rows; r += 3) {
    for (int c = 0; c < g.cols; c += 3) {
      const Vec2 p = g.cell_center(r, c);
      const double d = std::abs(testkit::nearest_on_centerline(s.centerline, p).signed_distance);
      if (std::abs(d - s.corridor_halfwidth) < 1e-6) continue;
      CHECK_EQ(g.at(kDrivable, r, c), d <= s.corridor_halfwidth ? 1.0 : 0.0);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("grid covers the corridor padded by 5 m") {
  const Scene s = generate_scene(5, Difficulty::Hard);
  const FeatureGrid g = rasterize(s);
  const double pad = SceneConfig{}.grid_padding;
  for (const auto& p : s.centerline) {
    CHECK(p.x - s.corridor_halfwidth - pad >= g.origin.x - g.cell);
    CHECK(p.y - s.corridor_halfwidth - pad >= g.origin.y - g.cell);
    CHECK(p.x + s.corridor_halfwidth + pad <= g.origin.x + g.cols * g.cell);
    CHECK(p.y + s.corridor_halfwidth + pad <= g.origin.y + g.rows * g.cell);
  }
}

TEST_CASE("agent cell is occupied in its step bucket") {
  Scene s = testkit::straight_scene(5.0);
  testkit::add_agent(s, [](int k) { return Waypoint{30.0 + k, 0.0, 0.0}; });
  const FeatureGrid g = rasterize(s);
  for (int k = 1; k < s.sim_steps; ++k) {
    const int b = occupancy_bucket(k, s.sim_steps, 4);
    const int col = static_cast<int>(std::lround((30.0 + k - g.origin.x) / g.cell));
    const int row = static_cast<int>(std::lround((0.0 - g.origin.y) / g.cell));
    CHECK_EQ(g.at(kOccupancy0 + b, row, col), 1.0);
  }
}

TEST_CASE("sample_feature contracts") {
  const Scene s = generate_scene(21, Difficulty::Hard);
  const FeatureGrid g = rasterize(s);
  SUBCASE("cell center returns the cell") {
    for (int r = 1; r < g.rows; r += 17) {
      for (int c = 1; c < g.cols; c += 13) {
        const auto f = sample_feature(g, g.cell_center(r, c));
        for (int ch = 0; ch < g.channels; ++ch) CHECK_EQ(f[ch], g.at(ch, r, c));
      }
    }
  }
  SUBCASE("midpoint between differing cells interpolates") {
    FeatureGrid h = g;
    std::fill(h.data.begin(), h.data.end(), 0.0);
    h.at(0, 4, 5) = 1.0;
    const Vec2 a = h.cell_center(4, 4), b = h.cell_center(4, 5);
    const auto f = sample_feature(h, {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
    CHECK(f[0] == doctest::Approx(0.5).epsilon(1e-12));
    for (int ch = 1; ch < h.channels; ++ch) CHECK_EQ(f[ch], 0.0);
  }
  SUBCASE("outside the grid is zero") {
    const auto f = sample_feature(g, {g.origin.x - 100.0, g.origin.y - 100.0});
    for (double v : f) CHECK_EQ(v, 0.0);
  }
}

TEST_CASE("parallel rasterization equals the serial reference") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Scene s = generate_scene(seed, Difficulty::Hard);
    const FeatureGrid a = rasterize(s), b = rasterize_serial(s);
    CHECK(a.data == b.data);
    for (double v : a.data) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("scene dataset round trip") {
  const std::string dir = testkit::temp_dir("scene_io");
  std::vector<SceneRecord> recs;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    SceneRecord r{generate_scene(seed, static_cast<Difficulty>(seed % 3)), std::nullopt};
    try {
      r.expert = expert_trajectory(r.scene);
    } catch (const Error&) {
    }
    recs.push_back(r);
  }
  const std::string path = dir + "/scenes.jsonl";
  write_scene_dataset(path, recs);
  const auto back = read_scene_dataset(path);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].scene == recs[i].scene);
    CHECK(back[i].expert == recs[i].expert);
  }
}

TEST_CASE("trajectory invariants are enforced") {
  const SceneConfig cfg;
  Trajectory t = testkit::straight_traj(testkit::straight_scene(), 10.0);
  CHECK_NOTHROW(check_trajectory(t, cfg));
  t.waypoints.pop_back();
  CHECK_THROWS_AS(check_trajectory(t, cfg), Error);
  Trajectory fast = testkit::straight_traj(testkit::straight_scene(), 40.0);
  CHECK_THROWS_AS(check_trajectory(fast, cfg), Error);
}

}
