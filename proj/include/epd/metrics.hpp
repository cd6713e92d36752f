#pragma once

#include <optional>
#include <string>
#include <vector>

#include "epd/common.hpp"
#include "epd/scene.hpp"

namespace epd::metrics {

struct MetricConfig {
  int n_samples = 32;
  double dt = 0.1;
  int n_bins = 20;
  double smoothing = 0.5;  // Laplace mass spread across bins
  // Histogram ranges; every feature here is a nonnegative magnitude binned
  // uniformly on [0, max].
  double speed_max = 30.0;
  double accel_max = 10.0;
  double jerk_max = 20.0;
  double heading_rate_max = 1.5;
  double agent_dist_max = 50.0;
  double lane_dist_max = 10.0;
  double offlane_threshold = 5.0;  // meters from the nearest lane center
  // Realism families; weights renormalize over the families present.
  double w_kinematic = 1.0 / 3.0;
  double w_interactive = 1.0 / 3.0;
  double w_map = 1.0 / 3.0;
  // Comfort bands drawn on kinematics plots (aggressive-driver envelope).
  double accel_band = 4.0;
  double jerk_band = 8.0;

  void validate() const;  // throws ConfigError
};

// Per-timestep kinematics on t = 0, dt, ..., horizon. Polynomial inputs use
// analytic derivatives; point trajectories use central differences. Heading
// follows the velocity direction and is held while speed < 0.1 m/s (heading
// rate 0 there).
struct FeatureSeries {
  std::vector<double> speed, accel, jerk, heading_rate;
};
FeatureSeries kinematic_features(const scene::FutureTraj& traj, double dt,
                                 double horizon);

// Positions and held headings sampled on the metric grid.
struct SampledTraj {
  std::vector<Vec2> pos;
  std::vector<double> heading;
};
SampledTraj sample_traj(const scene::FutureTraj& traj, double dt, double horizon);

// Geometric mean over timesteps of the smoothed histogram mass at the ground
// truth value: per step, mass = (count + smoothing/n_bins) / (n + smoothing).
// Values are clamped into [lo, hi]; result lies in (0, 1].
double likelihood_score(const std::vector<double>& gt_values,
                        const std::vector<std::vector<double>>& sample_values,
                        double lo, double hi, int n_bins, double smoothing);

// Oriented-footprint overlap per unordered agent pair per timestep.
struct CollisionGrid {
  std::vector<std::pair<int, int>> pairs;      // i < j
  std::vector<std::vector<bool>> hits;         // [pair][timestep]
  bool agent_hit(int agent, int step) const;   // any pair containing agent
  bool agent_any(int agent) const;             // any timestep
};
CollisionGrid collision_check(const std::vector<scene::FutureTraj>& trajs,
                              const std::vector<Vec2>& footprints, double dt,
                              double horizon);

// Per-timestep distance to the nearest lane_center element (closest-point
// projection). Empty when the map has no lane centers.
std::vector<double> map_distance(const scene::FutureTraj& traj,
                                 const std::vector<scene::MapElement>& map,
                                 double dt, double horizon);

// Joint displacement error: min over samples of the mean over agents and
// timesteps of the distance to ground truth.
double minade(const std::vector<std::vector<scene::FutureTraj>>& samples,
              const std::vector<scene::FutureTraj>& gt, double dt, double horizon);

// Mean over unordered sample pairs of the mean-over-agents distance between
// final positions.
double coverage(const std::vector<std::vector<scene::FutureTraj>>& samples,
                double horizon);

struct MetricReport {
  double realism_meta{0.0};
  double kinematic{0.0};
  std::optional<double> interactive;     // absent for single-agent scenes
  std::optional<double> map_adherence;   // absent without lane centers
  double minade_m{0.0};
  double coverage_m{0.0};
  // Per-feature sub-scores (means over agents).
  double speed_score{0.0}, accel_score{0.0}, jerk_score{0.0},
      heading_rate_score{0.0};
  std::optional<double> agent_distance_score, collision_score;
  std::optional<double> lane_distance_score, offlane_score;
};

// Scores `samples` (n_samples joint continuations, each one trajectory per
// agent) against the scene's ground-truth futures.
MetricReport compute_report(const scene::Scene& scene,
                            const std::vector<std::vector<scene::FutureTraj>>& samples,
                            const MetricConfig& cfg);

struct Selection {
  std::vector<std::string> ids;
  bool truncated{false};  // n exceeded the corpus size
};

// The n scenes where a constant-velocity continuation scores worst on the
// realism meta metric; ties break lexicographically by scene id.
Selection select_challenging(const std::vector<scene::Scene>& scenes, int n,
                             const MetricConfig& cfg);

}  // namespace epd::metrics
