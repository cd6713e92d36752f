#include "epd/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace epd::scene {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string to_string(AgentCategory c) {
  switch (c) {
    case AgentCategory::vehicle: return "vehicle";
    case AgentCategory::pedestrian: return "pedestrian";
    case AgentCategory::cyclist: return "cyclist";
    case AgentCategory::ego: return "ego";
  }
  throw std::invalid_argument("unknown agent category");
}

std::string to_string(MapCategory c) {
  switch (c) {
    case MapCategory::lane_center: return "lane_center";
    case MapCategory::crosswalk: return "crosswalk";
  }
  throw std::invalid_argument("unknown map category");
}

AgentCategory agent_category_from_string(const std::string& s) {
  if (s == "vehicle") return AgentCategory::vehicle;
  if (s == "pedestrian") return AgentCategory::pedestrian;
  if (s == "cyclist") return AgentCategory::cyclist;
  if (s == "ego") return AgentCategory::ego;
  throw DataError("unknown agent category '" + s + "'");
}

MapCategory map_category_from_string(const std::string& s) {
  if (s == "lane_center") return MapCategory::lane_center;
  if (s == "crosswalk") return MapCategory::crosswalk;
  throw DataError("unknown map category '" + s + "'");
}

Vec2 default_footprint(AgentCategory c) {
  switch (c) {
    case AgentCategory::vehicle:
    case AgentCategory::ego: return {4.7, 2.0};
    case AgentCategory::pedestrian: return {0.8, 0.8};
    case AgentCategory::cyclist: return {1.8, 0.6};
  }
  throw std::invalid_argument("unknown agent category");
}

void validate(const Scene& scene) {
  auto fail = [&](const std::string& msg) {
    throw DataError("scene '" + scene.scene_id + "': " + msg);
  };
  if (scene.scene_id.empty()) fail("empty scene_id");
  if (!(scene.horizon_s > 0.0)) fail("horizon_s must be positive");
  if (!(scene.eval_horizon_s > 0.0) || scene.eval_horizon_s > scene.horizon_s + 1e-9)
    fail("eval_horizon_s must lie in (0, horizon_s]");
  std::set<std::string> ids;
  for (const Agent& a : scene.agents) {
    if (a.id.empty()) fail("agent with empty id");
    if (!ids.insert(a.id).second) fail("duplicate agent id '" + a.id + "'");
    if (a.history.degree() != kHistoryDegree)
      fail("agent '" + a.id + "': history degree must be " + std::to_string(kHistoryDegree));
    if (std::abs(a.history.duration() - kHistoryDuration) > 1e-9)
      fail("agent '" + a.id + "': history duration must be 5 s");
    if (!(a.tw_first >= 0.0) || !(a.tw_first < a.tw_last) ||
        a.tw_last > kHistoryDuration + 1e-9)
      fail("agent '" + a.id + "': time window must satisfy 0 <= first < last <= 5");
    if (!(a.length > 0.0) || !(a.width > 0.0))
      fail("agent '" + a.id + "': footprint sides must be positive");
    if (a.future) {
      if (a.future->degree() != kFutureDegree)
        fail("agent '" + a.id + "': future degree must be " + std::to_string(kFutureDegree));
      if (std::abs(a.future->duration() - scene.horizon_s) > 1e-9)
        fail("agent '" + a.id + "': future duration must equal horizon_s");
    }
  }
  std::set<std::string> mids;
  for (const MapElement& m : scene.map) {
    if (m.id.empty()) fail("map element with empty id");
    if (!mids.insert(m.id).second) fail("duplicate map id '" + m.id + "'");
    if (m.geometry.degree() != kMapDegree)
      fail("map '" + m.id + "': geometry degree must be " + std::to_string(kMapDegree));
  }
}

poly::PolyCurve to_frame(const poly::PolyCurve& curve, const Pose& frame) {
  const Vec2 shift = (Vec2{0, 0} - frame.position).rotated(-frame.heading);
  return curve.transformed(-frame.heading, shift);
}

poly::PolyCurve from_frame(const poly::PolyCurve& curve, const Pose& frame) {
  return curve.transformed(frame.heading, frame.position);
}

Pose agent_frame(const Agent& agent) {
  const Vec2 pos = agent.history.eval(agent.tw_last);
  const Vec2 vel = agent.history.derivative(agent.tw_last);
  const double heading = vel.norm() < 0.1 ? 0.0 : std::atan2(vel.y, vel.x);
  return {pos, heading};
}

Pose map_frame(const MapElement& element) {
  const Vec2 start = element.geometry.eval(0.0);
  Vec2 tangent = element.geometry.derivative(0.0);
  if (tangent.norm() < 1e-9) {
    // Degenerate start tangent: fall back to the overall chord direction.
    tangent = element.geometry.control_points().back() - element.geometry.control_points().front();
  }
  const double heading = tangent.norm() < 1e-9 ? 0.0 : std::atan2(tangent.y, tangent.x);
  return {start, heading};
}

SceneFeatures pack_features(const Scene& scene) {
  const int a_count = static_cast<int>(scene.agents.size());
  const int m_count = static_cast<int>(scene.map.size());
  SceneFeatures f;
  f.agent_inputs.resize(a_count, 16);
  f.map_inputs.resize(m_count, 8);
  f.agent_frames.resize(a_count);
  f.map_frames.resize(m_count);
  f.degenerate.assign(a_count, false);

  for (int i = 0; i < a_count; ++i) {
    const Agent& a = scene.agents[i];
    const Pose frame = agent_frame(a);
    f.agent_frames[i] = frame;
    const auto disp = poly::to_displacements(to_frame(a.history, frame));
    for (int k = 0; k < 10; ++k) f.agent_inputs(i, k) = disp[k];
    f.agent_inputs(i, 10) = a.tw_first;
    f.agent_inputs(i, 11) = a.tw_last;
    for (int k = 0; k < 4; ++k) f.agent_inputs(i, 12 + k) = 0.0;
    f.agent_inputs(i, 12 + static_cast<int>(a.category)) = 1.0;

    const auto& cp = a.history.control_points();
    bool degen = true;
    for (const Vec2& p : cp)
      if ((p - cp.front()).norm() > 1e-12) degen = false;
    f.degenerate[i] = degen;
  }

  for (int j = 0; j < m_count; ++j) {
    const MapElement& m = scene.map[j];
    const Pose frame = map_frame(m);
    f.map_frames[j] = frame;
    const auto disp = poly::to_displacements(to_frame(m.geometry, frame));
    for (int k = 0; k < 6; ++k) f.map_inputs(j, k) = disp[k];
    f.map_inputs(j, 6) = m.category == MapCategory::lane_center ? 1.0 : 0.0;
    f.map_inputs(j, 7) = m.category == MapCategory::crosswalk ? 1.0 : 0.0;
  }
  return f;
}

Vec2 position_at(const FutureTraj& traj, double t) {
  if (const auto* curve = std::get_if<poly::PolyCurve>(&traj)) return curve->eval(t);
  const auto& pt = std::get<PointTrajectory>(traj);
  if (pt.points.empty()) throw std::invalid_argument("position_at: empty trajectory");
  const double idx = std::clamp(t / pt.dt, 0.0, double(pt.points.size() - 1));
  const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
  const std::size_t hi = std::min(lo + 1, pt.points.size() - 1);
  const double w = idx - double(lo);
  return pt.points[lo] * (1.0 - w) + pt.points[hi] * w;
}

double traj_duration(const FutureTraj& traj) {
  if (const auto* curve = std::get_if<poly::PolyCurve>(&traj)) return curve->duration();
  const auto& pt = std::get<PointTrajectory>(traj);
  return pt.points.empty() ? 0.0 : pt.dt * double(pt.points.size() - 1);
}

std::vector<FutureTraj> stationary_correction(const Scene& scene,
                                              std::vector<FutureTraj> generated) {
  if (generated.size() != scene.agents.size())
    throw std::invalid_argument("stationary_correction: one trajectory per agent required");
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const FutureTraj& traj = generated[i];
    const Vec2 start = position_at(traj, 0.0);
    double max_dist = 0.0;
    if (const auto* curve = std::get_if<poly::PolyCurve>(&traj)) {
      for (int k = 0; k <= 60; ++k) {
        const double t = curve->duration() * k / 60.0;
        max_dist = std::max(max_dist, (curve->eval(t) - start).norm());
      }
    } else {
      for (const Vec2& p : std::get<PointTrajectory>(traj).points)
        max_dist = std::max(max_dist, (p - start).norm());
    }
    if (max_dist < 1.0) {
      const Vec2 anchor = scene.agents[i].history.eval(scene.agents[i].tw_last);
      if (std::holds_alternative<poly::PolyCurve>(traj)) {
        const auto& c = std::get<poly::PolyCurve>(traj);
        generated[i] = poly::PolyCurve(
            std::vector<Vec2>(c.control_points().size(), anchor), c.duration());
      } else {
        auto pt = std::get<PointTrajectory>(traj);
        std::fill(pt.points.begin(), pt.points.end(), anchor);
        generated[i] = std::move(pt);
      }
    }
  }
  return generated;
}

std::vector<poly::PolyCurve> constant_velocity_rollout(const Scene& scene) {
  std::vector<poly::PolyCurve> out;
  out.reserve(scene.agents.size());
  for (const Agent& a : scene.agents) {
    const Vec2 p0 = a.history.eval(a.tw_last);
    const Vec2 v = a.history.derivative(kHistoryDuration);
    poly::PolyCurve line({p0, p0 + v * scene.horizon_s}, scene.horizon_s);
    for (int d = 1; d < kFutureDegree; ++d) line = line.elevated();
    out.push_back(std::move(line));
  }
  return out;
}

namespace {

std::vector<Vec2> parse_cp(const json& arr, std::size_t expected, const std::string& where) {
  if (!arr.is_array() || arr.size() != expected)
    throw DataError(where + ": expected " + std::to_string(expected) + " [x,y] pairs");
  std::vector<Vec2> cp;
  cp.reserve(expected);
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
      throw DataError(where + ": control point must be a [x,y] number pair");
    const double x = pair[0].get<double>(), y = pair[1].get<double>();
    if (!std::isfinite(x) || !std::isfinite(y))
      throw DataError(where + ": non-finite control point");
    cp.push_back({x, y});
  }
  return cp;
}

const json& need(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where + ": missing field '" + key + "'");
  return *it;
}

double need_number(const json& obj, const char* key, const std::string& where) {
  const json& v = need(obj, key, where);
  if (!v.is_number()) throw DataError(where + "." + key + ": expected a number");
  return v.get<double>();
}

std::string need_string(const json& obj, const char* key, const std::string& where) {
  const json& v = need(obj, key, where);
  if (!v.is_string()) throw DataError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

Scene scene_from_json(const json& j) {
  if (!j.is_object()) throw DataError("scene: expected a JSON object");
  Scene s;
  s.scene_id = need_string(j, "scene_id", "scene");
  s.horizon_s = need_number(j, "horizon_s", "scene");
  s.eval_horizon_s = need_number(j, "eval_horizon_s", "scene");
  const json& agents = need(j, "agents", "scene");
  if (!agents.is_array()) throw DataError("scene.agents: expected an array");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string where = "agents[" + std::to_string(i) + "]";
    const json& ja = agents[i];
    if (!ja.is_object()) throw DataError(where + ": expected an object");
    Agent a{.id = need_string(ja, "id", where),
            .category = agent_category_from_string(need_string(ja, "category", where)),
            .history = poly::PolyCurve(
                parse_cp(need(ja, "history_cp", where), kHistoryDegree + 1,
                         where + ".history_cp"),
                kHistoryDuration)};
    const json& tw = need(ja, "tw", where);
    if (!tw.is_array() || tw.size() != 2 || !tw[0].is_number() || !tw[1].is_number())
      throw DataError(where + ".tw: expected [first, last]");
    a.tw_first = tw[0].get<double>();
    a.tw_last = tw[1].get<double>();
    const json& fp = need(ja, "footprint", where);
    if (!fp.is_array() || fp.size() != 2 || !fp[0].is_number() || !fp[1].is_number())
      throw DataError(where + ".footprint: expected [length, width]");
    a.length = fp[0].get<double>();
    a.width = fp[1].get<double>();
    if (ja.contains("future_cp"))
      a.future = poly::PolyCurve(
          parse_cp(ja["future_cp"], kFutureDegree + 1, where + ".future_cp"), s.horizon_s);
    s.agents.push_back(std::move(a));
  }
  const json& map = need(j, "map", "scene");
  if (!map.is_array()) throw DataError("scene.map: expected an array");
  for (std::size_t i = 0; i < map.size(); ++i) {
    const std::string where = "map[" + std::to_string(i) + "]";
    const json& jm = map[i];
    if (!jm.is_object()) throw DataError(where + ": expected an object");
    s.map.push_back(
        {.id = need_string(jm, "id", where),
         .category = map_category_from_string(need_string(jm, "category", where)),
         .geometry = poly::PolyCurve(
             parse_cp(need(jm, "cp", where), kMapDegree + 1, where + ".cp"), 1.0)});
  }
  validate(s);
  return s;
}

ordered_json cp_to_json(const poly::PolyCurve& c) {
  ordered_json arr = ordered_json::array();
  for (const Vec2& p : c.control_points()) arr.push_back({p.x, p.y});
  return arr;
}

ordered_json scene_to_json(const Scene& s) {
  ordered_json j;
  j["scene_id"] = s.scene_id;
  j["horizon_s"] = s.horizon_s;
  j["eval_horizon_s"] = s.eval_horizon_s;
  j["agents"] = ordered_json::array();
  for (const Agent& a : s.agents) {
    ordered_json ja;
    ja["id"] = a.id;
    ja["category"] = to_string(a.category);
    ja["tw"] = {a.tw_first, a.tw_last};
    ja["footprint"] = {a.length, a.width};
    ja["history_cp"] = cp_to_json(a.history);
    if (a.future) ja["future_cp"] = cp_to_json(*a.future);
    j["agents"].push_back(std::move(ja));
  }
  j["map"] = ordered_json::array();
  for (const MapElement& m : s.map) {
    ordered_json jm;
    jm["id"] = m.id;
    jm["category"] = to_string(m.category);
    jm["cp"] = cp_to_json(m.geometry);
    j["map"].push_back(std::move(jm));
  }
  return j;
}

}  // namespace

std::vector<Scene> read_scenes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<Scene> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(scene_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw DataError(path + " line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw DataError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_scenes(const std::vector<Scene>& scenes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (const Scene& s : scenes) out << scene_to_json(s).dump() << "\n";
}

}  // namespace epd::scene
