#include "epd/scene.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

using namespace epd;
using namespace epd::scene;

namespace {

poly::PolyCurve line_curve(Vec2 a, Vec2 b, double duration, int degree) {
  poly::PolyCurve c({a, b}, duration);
  for (int d = 1; d < degree; ++d) c = c.elevated();
  return c;
}

Scene make_scene() {
  Scene s;
  s.scene_id = "t0";
  Agent ego{.id = "ego",
            .category = AgentCategory::ego,
            .history = line_curve({0, 0}, {10, 0}, 5.0, kHistoryDegree)};
  ego.future = line_curve({10, 0}, {22, 0}, 6.0, kFutureDegree);
  Agent other{.id = "v1",
              .category = AgentCategory::vehicle,
              .history = line_curve({5, 3}, {5, 13}, 5.0, kHistoryDegree)};
  other.future = line_curve({5, 13}, {5, 25}, 6.0, kFutureDegree);
  s.agents = {ego, other};
  s.map.push_back({.id = "lane0",
                   .category = MapCategory::lane_center,
                   .geometry = poly::PolyCurve({{-20, 0}, {0, 0}, {20, 0}, {40, 0}}, 1.0)});
  s.map.push_back({.id = "cw0",
                   .category = MapCategory::crosswalk,
                   .geometry = poly::PolyCurve({{5, -5}, {5, 0}, {5, 5}, {5, 10}}, 1.0)});
  validate(s);
  return s;
}

Scene transformed_scene(const Scene& s, double rot, Vec2 shift) {
  Scene out = s;
  for (Agent& a : out.agents) {
    a.history = a.history.transformed(rot, shift);
    if (a.future) a.future = a.future->transformed(rot, shift);
  }
  for (MapElement& m : out.map) m.geometry = m.geometry.transformed(rot, shift);
  return out;
}

}  // namespace

TEST_CASE("agent frame uses the last observed pose") {
  const Scene s = make_scene();
  const Pose f = agent_frame(s.agents[0]);
  CHECK((f.position - Vec2{10, 0}).norm() <= 1e-12);
  CHECK(std::abs(f.heading) <= 1e-12);
  const Pose f1 = agent_frame(s.agents[1]);
  CHECK(std::abs(f1.heading - M_PI / 2.0) <= 1e-12);
}

TEST_CASE("agent frame heading falls back to zero for slow agents") {
  Agent a{.id = "s",
          .category = AgentCategory::vehicle,
          .history = line_curve({3, 4}, {3.1, 4.0}, 5.0, kHistoryDegree)};
  const Pose f = agent_frame(a);  // speed 0.02 m/s
  CHECK(f.heading == 0.0);
  CHECK((f.position - Vec2{3.1, 4.0}).norm() <= 1e-12);
}

TEST_CASE("partially observed agents anchor at tw_last") {
  Agent a{.id = "p",
          .category = AgentCategory::vehicle,
          .history = line_curve({0, 0}, {10, 0}, 5.0, kHistoryDegree),
          .tw_first = 0.5,
          .tw_last = 3.0};
  const Pose f = agent_frame(a);
  CHECK((f.position - Vec2{6, 0}).norm() <= 1e-12);
}

TEST_CASE("packed features have the documented layout") {
  const Scene s = make_scene();
  const SceneFeatures f = pack_features(s);
  REQUIRE(f.agent_inputs.rows() == 2);
  REQUIRE(f.agent_inputs.cols() == 16);
  REQUIRE(f.map_inputs.rows() == 2);
  REQUIRE(f.map_inputs.cols() == 8);
  // Ego: straight 10 m history in its own frame -> displacements (2,0) x5.
  for (int k = 0; k < 5; ++k) {
    CHECK(f.agent_inputs(0, 2 * k) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::abs(f.agent_inputs(0, 2 * k + 1)) <= 1e-9);
  }
  CHECK(f.agent_inputs(0, 10) == 0.0);
  CHECK(f.agent_inputs(0, 11) == 5.0);
  CHECK(f.agent_inputs(0, 12 + 3) == 1.0);  // ego one-hot slot
  CHECK(f.agent_inputs(1, 12 + 0) == 1.0);  // vehicle one-hot slot
  CHECK(f.map_inputs(0, 6) == 1.0);
  CHECK(f.map_inputs(1, 7) == 1.0);
  CHECK_FALSE(f.degenerate[0]);
}

TEST_CASE("packed features are invariant to rigid scene motion") {
  const Scene s = make_scene();
  const Scene moved = transformed_scene(s, 1.1, {137.0, -42.0});
  const SceneFeatures a = pack_features(s);
  const SceneFeatures b = pack_features(moved);
  CHECK((a.agent_inputs - b.agent_inputs).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((a.map_inputs - b.map_inputs).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("degenerate histories are flagged and finite") {
  Scene s = make_scene();
  s.agents[1].history =
      poly::PolyCurve(std::vector<Vec2>(kHistoryDegree + 1, Vec2{7, 7}), 5.0);
  const SceneFeatures f = pack_features(s);
  CHECK(f.degenerate[1]);
  CHECK(f.agent_inputs.allFinite());
  for (int k = 0; k < 10; ++k) CHECK(f.agent_inputs(1, k) == 0.0);
}

TEST_CASE("frame round trip preserves curves") {
  const Scene s = make_scene();
  const Pose frame{{12.0, -3.0}, 0.7};
  const auto local = to_frame(s.agents[0].history, frame);
  const auto back = from_frame(local, frame);
  for (int i = 0; i <= kHistoryDegree; ++i)
    CHECK((back.control_points()[i] - s.agents[0].history.control_points()[i]).norm() <= 1e-12);
}

TEST_CASE("stationary correction replaces sub-meter continuations") {
  const Scene s = make_scene();
  std::vector<FutureTraj> trajs;
  trajs.push_back(line_curve({10, 0}, {10.8, 0}, 6.0, kFutureDegree));  // 0.8 m
  trajs.push_back(line_curve({5, 13}, {5, 25}, 6.0, kFutureDegree));    // 12 m
  auto fixed = stationary_correction(s, trajs);
  const auto& c0 = std::get<poly::PolyCurve>(fixed[0]);
  for (const Vec2& p : c0.control_points()) CHECK((p - Vec2{10, 0}).norm() <= 1e-12);
  const auto& c1 = std::get<poly::PolyCurve>(fixed[1]);
  CHECK((c1.eval(6.0) - Vec2{5, 25}).norm() <= 1e-9);

  // Idempotent: a second pass changes nothing.
  auto twice = stationary_correction(s, fixed);
  const auto& c0b = std::get<poly::PolyCurve>(twice[0]);
  for (std::size_t i = 0; i < c0.control_points().size(); ++i)
    CHECK((c0b.control_points()[i] - c0.control_points()[i]).norm() == 0.0);
}

TEST_CASE("stationary correction threshold is strict") {
  const Scene s = make_scene();
  std::vector<FutureTraj> trajs;
  trajs.push_back(line_curve({10, 0}, {11.0, 0}, 6.0, kFutureDegree));  // exactly 1.0 m
  trajs.push_back(line_curve({5, 13}, {5, 25}, 6.0, kFutureDegree));
  auto fixed = stationary_correction(s, trajs);
  const auto& c0 = std::get<poly::PolyCurve>(fixed[0]);
  CHECK((c0.eval(6.0) - Vec2{11.0, 0}).norm() <= 1e-9);  // untouched
}

TEST_CASE("stationary correction handles point trajectories") {
  const Scene s = make_scene();
  std::vector<FutureTraj> trajs;
  PointTrajectory jitter;
  for (int k = 0; k <= 60; ++k)
    jitter.points.push_back({10.0 + 0.3 * std::sin(k * 0.4), 0.05 * std::cos(k * 0.6)});
  trajs.push_back(jitter);
  PointTrajectory moving;
  for (int k = 0; k <= 60; ++k) moving.points.push_back({5.0, 13.0 + 0.2 * k});
  trajs.push_back(moving);
  auto fixed = stationary_correction(s, trajs);
  for (const Vec2& p : std::get<PointTrajectory>(fixed[0]).points)
    CHECK((p - Vec2{10, 0}).norm() <= 1e-12);
  CHECK((std::get<PointTrajectory>(fixed[1]).points.back() - Vec2{5, 25}).norm() <= 1e-12);
}

TEST_CASE("constant velocity rollout extrapolates the terminal velocity") {
  const Scene s = make_scene();
  const auto rollout = constant_velocity_rollout(s);
  REQUIRE(rollout.size() == 2);
  CHECK(rollout[0].degree() == kFutureDegree);
  CHECK((rollout[0].eval(0.0) - Vec2{10, 0}).norm() <= 1e-9);
  CHECK((rollout[0].eval(3.0) - Vec2{16, 0}).norm() <= 1e-9);
  CHECK((rollout[0].eval(6.0) - Vec2{22, 0}).norm() <= 1e-9);
  CHECK((rollout[1].eval(6.0) - Vec2{5, 25}).norm() <= 1e-9);
}

TEST_CASE("point trajectory interpolation") {
  PointTrajectory pt{{{0, 0}, {1, 0}, {2, 0}}, 0.5};
  FutureTraj t = pt;
  CHECK((position_at(t, 0.25) - Vec2{0.5, 0}).norm() <= 1e-12);
  CHECK((position_at(t, 1.0) - Vec2{2, 0}).norm() <= 1e-12);
  CHECK(traj_duration(t) == doctest::Approx(1.0));
}

TEST_CASE("jsonl round trip preserves scenes") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "epd_scene_roundtrip.jsonl").string();
  Scene s = make_scene();
  s.agents[1].future.reset();  // optional futures survive the trip
  s.eval_horizon_s = 4.1;
  write_scenes({s, make_scene()}, path);
  const auto back = read_scenes(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].scene_id == "t0");
  CHECK(back[0].eval_horizon_s == doctest::Approx(4.1));
  CHECK_FALSE(back[0].agents[1].future.has_value());
  REQUIRE(back[1].agents[0].future.has_value());
  for (int i = 0; i <= kHistoryDegree; ++i)
    CHECK((back[0].agents[0].history.control_points()[i] -
           s.agents[0].history.control_points()[i])
              .norm() <= 1e-12);
  for (int i = 0; i <= kMapDegree; ++i)
    CHECK((back[0].map[1].geometry.control_points()[i] -
           s.map[1].geometry.control_points()[i])
              .norm() <= 1e-12);
  // Writes are byte-deterministic.
  const auto path2 = (fs::temp_directory_path() / "epd_scene_roundtrip2.jsonl").string();
  write_scenes(back, path2);
  write_scenes(back, path);
  std::ifstream f1(path), f2(path2);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {});
  const std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("reading an empty file yields an empty corpus") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "epd_scene_empty.jsonl").string();
  std::ofstream(path).close();
  CHECK(read_scenes(path).empty());
  fs::remove(path);
}

TEST_CASE("parse errors report the line and the field") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "epd_scene_bad.jsonl").string();
  {
    std::ofstream out(path);
    Scene s = make_scene();
    write_scenes({s}, "/dev/null");
    out << R"({"scene_id":"ok","horizon_s":6.0,"eval_horizon_s":6.0,"agents":[],"map":[]})"
        << "\n";
    out << R"({"scene_id":"bad","horizon_s":6.0,"eval_horizon_s":6.0,"agents":[{"id":"a","category":"vehicle","footprint":[4.7,2.0],"history_cp":[[0,0],[1,0],[2,0],[3,0],[4,0],[5,0]]}],"map":[]})"
        << "\n";
  }
  try {
    read_scenes(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("tw") != std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("validation rejects malformed scenes") {
  Scene s = make_scene();
  s.agents[1].id = "ego";  // duplicate
  CHECK_THROWS_AS(validate(s), DataError);

  Scene s2 = make_scene();
  s2.agents[0].tw_first = 3.0;
  s2.agents[0].tw_last = 2.0;
  CHECK_THROWS_AS(validate(s2), DataError);

  Scene s3 = make_scene();
  s3.eval_horizon_s = 7.5;  // beyond horizon
  CHECK_THROWS_AS(validate(s3), DataError);

  Scene s4 = make_scene();
  s4.agents[0].length = -1.0;
  CHECK_THROWS_AS(validate(s4), DataError);
}
