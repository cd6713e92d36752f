#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "epd/common.hpp"
#include "epd/poly.hpp"

namespace epd::scene {

inline constexpr double kHistoryDuration = 5.0;  // seconds, fixed by convention
inline constexpr int kHistoryDegree = 5;
inline constexpr int kFutureDegree = 6;
inline constexpr int kMapDegree = 3;

enum class AgentCategory { vehicle, pedestrian, cyclist, ego };
enum class MapCategory { lane_center, crosswalk };

std::string to_string(AgentCategory c);
std::string to_string(MapCategory c);
AgentCategory agent_category_from_string(const std::string& s);
MapCategory map_category_from_string(const std::string& s);

// Length x width of the oriented footprint rectangle, by category.
Vec2 default_footprint(AgentCategory c);

struct Agent {
  std::string id;
  AgentCategory category{AgentCategory::vehicle};
  poly::PolyCurve history;          // degree 5 over [0, 5] s
  double tw_first{0.0};             // observed time window within the history
  double tw_last{kHistoryDuration};
  double length{4.7};
  double width{2.0};
  std::optional<poly::PolyCurve> future;  // degree 6 over [0, horizon_s]
};

struct MapElement {
  std::string id;
  MapCategory category{MapCategory::lane_center};
  poly::PolyCurve geometry;  // cubic on parameter interval [0, 1]
};

struct Scene {
  std::string scene_id;
  double horizon_s{6.0};
  double eval_horizon_s{6.0};
  std::vector<Agent> agents;
  std::vector<MapElement> map;
};

// Throws DataError describing the first violated invariant.
void validate(const Scene& scene);

// Express `curve` in / out of a local frame.
poly::PolyCurve to_frame(const poly::PolyCurve& curve, const Pose& frame);
poly::PolyCurve from_frame(const poly::PolyCurve& curve, const Pose& frame);

// Last observed pose: position and analytic-velocity heading at tw_last.
// Heading falls back to 0 when the speed there is below 0.1 m/s.
Pose agent_frame(const Agent& agent);
// Start point and start-tangent heading of the element geometry.
Pose map_frame(const MapElement& element);

// Query-centric model inputs: every row is expressed in its own local frame,
// so the packed values are invariant to rigid motions of the scene.
struct SceneFeatures {
  Eigen::MatrixXd agent_inputs;  // A x 16: displacements(10) | tw(2) | category(4)
  Eigen::MatrixXd map_inputs;    // M x 8:  displacements(6) | category(2)
  std::vector<Pose> agent_frames;
  std::vector<Pose> map_frames;
  std::vector<bool> degenerate;  // history control points all identical
};

SceneFeatures pack_features(const Scene& scene);

// A generated continuation for one agent: either a polynomial curve or a
// sampled point trajectory at fixed step (points[0] at t = 0).
struct PointTrajectory {
  std::vector<Vec2> points;
  double dt{0.1};
};

using FutureTraj = std::variant<poly::PolyCurve, PointTrajectory>;

Vec2 position_at(const FutureTraj& traj, double t);
double traj_duration(const FutureTraj& traj);

// Agents whose continuation stays within 1 m of its start (strict) are reset
// to a constant trajectory at the last measured position. Idempotent.
std::vector<FutureTraj> stationary_correction(const Scene& scene,
                                              std::vector<FutureTraj> generated);

// Degree-1 extrapolation of each agent from its last observed pose with the
// analytic history velocity at t = 5 s, elevated to the future degree.
std::vector<poly::PolyCurve> constant_velocity_rollout(const Scene& scene);

// JSON Lines IO. Reads validate every scene and report the offending line and
// field; writes are byte-deterministic.
std::vector<Scene> read_scenes(const std::string& path);
void write_scenes(const std::vector<Scene>& scenes, const std::string& path);

}  // namespace epd::scene
