#include "epd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "epd/geometry.hpp"
#include "epd/parallel.hpp"
#include "epd/poly.hpp"

namespace epd::metrics {
namespace {

constexpr double kHeldSpeed = 0.1;  // below this the heading is held

int grid_steps(double horizon, double dt) {
  if (horizon <= 0.0 || dt <= 0.0)
    throw MetricError("metrics: horizon and dt must be positive");
  return static_cast<int>(std::llround(horizon / dt));
}

// Central differences with one-sided ends; zero for singleton series.
std::vector<Vec2> difference(const std::vector<Vec2>& f, double dt) {
  const int n = static_cast<int>(f.size());
  std::vector<Vec2> d(n, Vec2{});
  if (n < 2) return d;
  d[0] = (f[1] - f[0]) * (1.0 / dt);
  d[n - 1] = (f[n - 1] - f[n - 2]) * (1.0 / dt);
  for (int k = 1; k + 1 < n; ++k) d[k] = (f[k + 1] - f[k - 1]) * (0.5 / dt);
  return d;
}

std::vector<double> held_headings(const std::vector<Vec2>& vel) {
  const int n = static_cast<int>(vel.size());
  std::vector<double> heading(n, 0.0);
  int first_valid = -1;
  double held = 0.0;
  for (int k = 0; k < n; ++k) {
    if (vel[k].norm() >= kHeldSpeed) {
      held = std::atan2(vel[k].y, vel[k].x);
      if (first_valid < 0) first_valid = k;
    }
    heading[k] = held;
  }
  for (int k = 0; k < first_valid; ++k) heading[k] = heading[first_valid];
  return heading;
}

}  // namespace

void MetricConfig::validate() const {
  if (n_samples < 2) throw ConfigError("metrics: n_samples must be >= 2");
  if (dt <= 0.0) throw ConfigError("metrics: dt must be positive");
  if (n_bins < 2) throw ConfigError("metrics: n_bins must be >= 2");
  if (smoothing <= 0.0) throw ConfigError("metrics: smoothing must be positive");
  for (double m : {speed_max, accel_max, jerk_max, heading_rate_max,
                   agent_dist_max, lane_dist_max, accel_band, jerk_band})
    if (m <= 0.0) throw ConfigError("metrics: feature ranges must be positive");
  if (offlane_threshold <= 0.0 || offlane_threshold > lane_dist_max)
    throw ConfigError("metrics: offlane_threshold must lie in (0, lane_dist_max]");
  if (w_kinematic < 0.0 || w_interactive < 0.0 || w_map < 0.0 ||
      std::abs(w_kinematic + w_interactive + w_map - 1.0) > 1e-9)
    throw ConfigError("metrics: family weights must be nonnegative and sum to 1");
}

SampledTraj sample_traj(const scene::FutureTraj& traj, double dt, double horizon) {
  const int steps = grid_steps(horizon, dt);
  SampledTraj out;
  out.pos.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) out.pos[k] = scene::position_at(traj, k * dt);

  std::vector<Vec2> vel;
  if (const auto* curve = std::get_if<poly::PolyCurve>(&traj)) {
    vel.resize(steps + 1);
    for (int k = 0; k <= steps; ++k) vel[k] = curve->derivative(k * dt);
  } else {
    vel = difference(out.pos, dt);
  }
  out.heading = held_headings(vel);
  return out;
}

FeatureSeries kinematic_features(const scene::FutureTraj& traj, double dt,
                                 double horizon) {
  const int steps = grid_steps(horizon, dt);
  FeatureSeries fs;
  fs.speed.resize(steps + 1);
  fs.accel.resize(steps + 1);
  fs.jerk.resize(steps + 1);
  fs.heading_rate.resize(steps + 1);

  if (const auto* curve = std::get_if<poly::PolyCurve>(&traj)) {
    for (int k = 0; k <= steps; ++k) {
      const double t = k * dt;
      const Vec2 v = curve->derivative(t, 1);
      const Vec2 a = curve->derivative(t, 2);
      const Vec2 j = curve->derivative(t, 3);
      fs.speed[k] = v.norm();
      fs.accel[k] = a.norm();
      fs.jerk[k] = j.norm();
      fs.heading_rate[k] =
          fs.speed[k] >= kHeldSpeed ? std::abs(v.cross(a)) / v.squared_norm() : 0.0;
    }
    return fs;
  }

  std::vector<Vec2> pos(steps + 1);
  for (int k = 0; k <= steps; ++k) pos[k] = scene::position_at(traj, k * dt);
  const auto vel = difference(pos, dt);
  const auto acc = difference(vel, dt);
  const auto jrk = difference(acc, dt);
  const auto heading = held_headings(vel);
  for (int k = 0; k <= steps; ++k) {
    fs.speed[k] = vel[k].norm();
    fs.accel[k] = acc[k].norm();
    fs.jerk[k] = jrk[k].norm();
    if (fs.speed[k] < kHeldSpeed) {
      fs.heading_rate[k] = 0.0;
    } else {
      const int lo = std::max(0, k - 1), hi = std::min(steps, k + 1);
      fs.heading_rate[k] =
          std::abs(wrap_angle(heading[hi] - heading[lo])) / ((hi - lo) * dt);
    }
  }
  return fs;
}

double likelihood_score(const std::vector<double>& gt_values,
                        const std::vector<std::vector<double>>& sample_values,
                        double lo, double hi, int n_bins, double smoothing) {
  if (sample_values.size() < 2)
    throw MetricError("likelihood_score: need at least 2 samples");
  if (hi <= lo) throw MetricError("likelihood_score: empty bin range");
  const int T = static_cast<int>(gt_values.size());
  for (const auto& s : sample_values)
    if (static_cast<int>(s.size()) != T)
      throw MetricError("likelihood_score: sample/gt length mismatch");
  if (T == 0) return 1.0;

  const double n = static_cast<double>(sample_values.size());
  auto bin_of = [&](double v) {
    const int b = static_cast<int>((v - lo) / (hi - lo) * n_bins);
    return std::clamp(b, 0, n_bins - 1);
  };
  double log_sum = 0.0;
  std::vector<int> counts(n_bins);
  for (int t = 0; t < T; ++t) {
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& s : sample_values) ++counts[bin_of(s[t])];
    const double mass =
        (counts[bin_of(gt_values[t])] + smoothing / n_bins) / (n + smoothing);
    log_sum += std::log(mass);
  }
  return std::exp(log_sum / T);
}

bool CollisionGrid::agent_hit(int agent, int step) const {
  for (size_t p = 0; p < pairs.size(); ++p)
    if ((pairs[p].first == agent || pairs[p].second == agent) && hits[p][step])
      return true;
  return false;
}

bool CollisionGrid::agent_any(int agent) const {
  for (size_t p = 0; p < pairs.size(); ++p)
    if (pairs[p].first == agent || pairs[p].second == agent)
      if (std::any_of(hits[p].begin(), hits[p].end(), [](bool b) { return b; }))
        return true;
  return false;
}

CollisionGrid collision_check(const std::vector<scene::FutureTraj>& trajs,
                              const std::vector<Vec2>& footprints, double dt,
                              double horizon) {
  if (trajs.size() != footprints.size())
    throw MetricError("collision_check: footprint count mismatch");
  const int steps = grid_steps(horizon, dt);
  const int A = static_cast<int>(trajs.size());
  std::vector<SampledTraj> st;
  st.reserve(A);
  for (const auto& tr : trajs) st.push_back(sample_traj(tr, dt, horizon));

  CollisionGrid grid;
  for (int i = 0; i < A; ++i)
    for (int j = i + 1; j < A; ++j) {
      grid.pairs.emplace_back(i, j);
      auto& row = grid.hits.emplace_back(steps + 1, false);
      for (int k = 0; k <= steps; ++k) {
        const geometry::OrientedRect ri{st[i].pos[k], st[i].heading[k],
                                        footprints[i].x, footprints[i].y};
        const geometry::OrientedRect rj{st[j].pos[k], st[j].heading[k],
                                        footprints[j].x, footprints[j].y};
        row[k] = geometry::rects_overlap(ri, rj);
      }
    }
  return grid;
}

std::vector<double> map_distance(const scene::FutureTraj& traj,
                                 const std::vector<scene::MapElement>& map,
                                 double dt, double horizon) {
  std::vector<const poly::PolyCurve*> lanes;
  for (const auto& el : map)
    if (el.category == scene::MapCategory::lane_center) lanes.push_back(&el.geometry);
  if (lanes.empty()) return {};

  const int steps = grid_steps(horizon, dt);
  std::vector<double> out(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    const Vec2 p = scene::position_at(traj, k * dt);
    double best = std::numeric_limits<double>::infinity();
    for (const auto* lane : lanes)
      best = std::min(best, poly::project_point(*lane, p).distance);
    out[k] = best;
  }
  return out;
}

double minade(const std::vector<std::vector<scene::FutureTraj>>& samples,
              const std::vector<scene::FutureTraj>& gt, double dt, double horizon) {
  if (samples.empty()) throw MetricError("minade: need at least 1 sample");
  const int steps = grid_steps(horizon, dt);
  const int A = static_cast<int>(gt.size());
  std::vector<std::vector<Vec2>> gt_pos(A);
  for (int a = 0; a < A; ++a) {
    gt_pos[a].resize(steps + 1);
    for (int k = 0; k <= steps; ++k) gt_pos[a][k] = scene::position_at(gt[a], k * dt);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& sample : samples) {
    if (static_cast<int>(sample.size()) != A)
      throw MetricError("minade: sample agent count mismatch");
    double sum = 0.0;
    for (int a = 0; a < A; ++a)
      for (int k = 0; k <= steps; ++k)
        sum += (scene::position_at(sample[a], k * dt) - gt_pos[a][k]).norm();
    best = std::min(best, sum / (A * (steps + 1)));
  }
  return best;
}

double coverage(const std::vector<std::vector<scene::FutureTraj>>& samples,
                double horizon) {
  if (samples.size() < 2) throw MetricError("coverage: need at least 2 samples");
  const int n = static_cast<int>(samples.size());
  const int A = static_cast<int>(samples[0].size());
  std::vector<std::vector<Vec2>> finals(n, std::vector<Vec2>(A));
  for (int s = 0; s < n; ++s) {
    if (static_cast<int>(samples[s].size()) != A)
      throw MetricError("coverage: sample agent count mismatch");
    for (int a = 0; a < A; ++a)
      finals[s][a] = scene::position_at(samples[s][a], horizon);
  }
  double sum = 0.0;
  int pairs = 0;
  for (int s = 0; s < n; ++s)
    for (int r = s + 1; r < n; ++r) {
      double agent_mean = 0.0;
      for (int a = 0; a < A; ++a) agent_mean += (finals[s][a] - finals[r][a]).norm();
      sum += A > 0 ? agent_mean / A : 0.0;
      ++pairs;
    }
  return sum / pairs;
}

namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

// Smoothed Bernoulli mass of the ground-truth indicator under the sample
// frequency; lies in (0, 1).
double bernoulli_mass(bool gt, int hits, int n, double smoothing) {
  const double p = (hits + smoothing / 2.0) / (n + smoothing);
  return gt ? p : 1.0 - p;
}

// Nearest-other-agent distance per agent per timestep.
std::vector<std::vector<double>> nearest_agent_series(
    const std::vector<SampledTraj>& st) {
  const int A = static_cast<int>(st.size());
  const int T = A > 0 ? static_cast<int>(st[0].pos.size()) : 0;
  std::vector<std::vector<double>> out(A, std::vector<double>(T));
  for (int i = 0; i < A; ++i)
    for (int k = 0; k < T; ++k) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < A; ++j)
        if (j != i) best = std::min(best, (st[i].pos[k] - st[j].pos[k]).norm());
      out[i][k] = best;
    }
  return out;
}

}  // namespace

MetricReport compute_report(const scene::Scene& scene,
                            const std::vector<std::vector<scene::FutureTraj>>& samples,
                            const MetricConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(samples.size());
  if (n < 2) throw MetricError("compute_report: need at least 2 samples");
  const int A = static_cast<int>(scene.agents.size());
  for (const auto& sample : samples)
    if (static_cast<int>(sample.size()) != A)
      throw MetricError("compute_report: sample agent count mismatch");

  const double horizon = scene.eval_horizon_s;
  const double dt = cfg.dt;

  std::vector<scene::FutureTraj> gt;
  std::vector<Vec2> footprints;
  gt.reserve(A);
  for (const auto& agent : scene.agents) {
    if (!agent.future)
      throw MetricError("compute_report: agent " + agent.id + " lacks ground truth");
    gt.emplace_back(*agent.future);
    footprints.push_back({agent.length, agent.width});
  }

  MetricReport report;

  // Kinematic family.
  std::vector<FeatureSeries> gt_kin(A);
  std::vector<std::vector<FeatureSeries>> sm_kin(n, std::vector<FeatureSeries>(A));
  for (int a = 0; a < A; ++a) gt_kin[a] = kinematic_features(gt[a], dt, horizon);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < A; ++a)
      sm_kin[s][a] = kinematic_features(samples[s][a], dt, horizon);

  std::vector<double> speed_sc(A), accel_sc(A), jerk_sc(A), hr_sc(A);
  for (int a = 0; a < A; ++a) {
    auto score = [&](auto member, double hi) {
      std::vector<std::vector<double>> sv(n);
      for (int s = 0; s < n; ++s) sv[s] = sm_kin[s][a].*member;
      return likelihood_score(gt_kin[a].*member, sv, 0.0, hi, cfg.n_bins,
                              cfg.smoothing);
    };
    speed_sc[a] = score(&FeatureSeries::speed, cfg.speed_max);
    accel_sc[a] = score(&FeatureSeries::accel, cfg.accel_max);
    jerk_sc[a] = score(&FeatureSeries::jerk, cfg.jerk_max);
    hr_sc[a] = score(&FeatureSeries::heading_rate, cfg.heading_rate_max);
  }
  report.speed_score = mean(speed_sc);
  report.accel_score = mean(accel_sc);
  report.jerk_score = mean(jerk_sc);
  report.heading_rate_score = mean(hr_sc);
  report.kinematic = (report.speed_score + report.accel_score + report.jerk_score +
                      report.heading_rate_score) /
                     4.0;

  // Interactive family (needs at least two agents).
  if (A >= 2) {
    std::vector<SampledTraj> gt_st(A);
    for (int a = 0; a < A; ++a) gt_st[a] = sample_traj(gt[a], dt, horizon);
    const auto gt_near = nearest_agent_series(gt_st);
    std::vector<std::vector<std::vector<double>>> sm_near(n);
    for (int s = 0; s < n; ++s) {
      std::vector<SampledTraj> st(A);
      for (int a = 0; a < A; ++a) st[a] = sample_traj(samples[s][a], dt, horizon);
      sm_near[s] = nearest_agent_series(st);
    }

    const CollisionGrid gt_coll = collision_check(gt, footprints, dt, horizon);
    std::vector<CollisionGrid> sm_coll;
    sm_coll.reserve(n);
    for (int s = 0; s < n; ++s)
      sm_coll.push_back(collision_check(samples[s], footprints, dt, horizon));

    std::vector<double> near_sc(A), coll_sc(A);
    for (int a = 0; a < A; ++a) {
      std::vector<std::vector<double>> sv(n);
      for (int s = 0; s < n; ++s) sv[s] = sm_near[s][a];
      near_sc[a] = likelihood_score(gt_near[a], sv, 0.0, cfg.agent_dist_max,
                                    cfg.n_bins, cfg.smoothing);
      int hits = 0;
      for (int s = 0; s < n; ++s) hits += sm_coll[s].agent_any(a) ? 1 : 0;
      coll_sc[a] = bernoulli_mass(gt_coll.agent_any(a), hits, n, cfg.smoothing);
    }
    report.agent_distance_score = mean(near_sc);
    report.collision_score = mean(coll_sc);
    report.interactive = 0.5 * (*report.agent_distance_score + *report.collision_score);
  }

  // Map family (needs lane centers).
  const auto gt_lane0 = map_distance(gt[0], scene.map, dt, horizon);
  if (!gt_lane0.empty()) {
    std::vector<double> lane_sc(A), off_sc(A);
    for (int a = 0; a < A; ++a) {
      const auto gt_dist = a == 0 ? gt_lane0 : map_distance(gt[a], scene.map, dt, horizon);
      std::vector<std::vector<double>> sv(n);
      int off_hits = 0;
      for (int s = 0; s < n; ++s) {
        sv[s] = map_distance(samples[s][a], scene.map, dt, horizon);
        off_hits += std::any_of(sv[s].begin(), sv[s].end(),
                                [&](double d) { return d > cfg.offlane_threshold; })
                        ? 1
                        : 0;
      }
      lane_sc[a] = likelihood_score(gt_dist, sv, 0.0, cfg.lane_dist_max, cfg.n_bins,
                                    cfg.smoothing);
      const bool gt_off = std::any_of(gt_dist.begin(), gt_dist.end(), [&](double d) {
        return d > cfg.offlane_threshold;
      });
      off_sc[a] = bernoulli_mass(gt_off, off_hits, n, cfg.smoothing);
    }
    report.lane_distance_score = mean(lane_sc);
    report.offlane_score = mean(off_sc);
    report.map_adherence = 0.5 * (*report.lane_distance_score + *report.offlane_score);
  }

  double weight = cfg.w_kinematic;
  double meta = cfg.w_kinematic * report.kinematic;
  if (report.interactive) {
    weight += cfg.w_interactive;
    meta += cfg.w_interactive * *report.interactive;
  }
  if (report.map_adherence) {
    weight += cfg.w_map;
    meta += cfg.w_map * *report.map_adherence;
  }
  report.realism_meta = weight > 0.0 ? meta / weight : 0.0;

  report.minade_m = minade(samples, gt, dt, horizon);
  report.coverage_m = coverage(samples, horizon);
  return report;
}

Selection select_challenging(const std::vector<scene::Scene>& scenes, int n,
                             const MetricConfig& cfg) {
  cfg.validate();
  const int count = static_cast<int>(scenes.size());
  std::vector<double> meta(count);
  parallel_for(count, [&](std::ptrdiff_t i) {
    const auto cv = scene::constant_velocity_rollout(scenes[i]);
    std::vector<scene::FutureTraj> one;
    one.reserve(cv.size());
    for (const auto& curve : cv) one.emplace_back(curve);
    const std::vector<std::vector<scene::FutureTraj>> samples(cfg.n_samples, one);
    meta[i] = compute_report(scenes[i], samples, cfg).realism_meta;
  });

  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (meta[a] != meta[b]) return meta[a] < meta[b];
    return scenes[a].scene_id < scenes[b].scene_id;
  });

  Selection sel;
  sel.truncated = n > count;
  const int take = std::min(std::max(n, 0), count);
  sel.ids.reserve(take);
  for (int k = 0; k < take; ++k) sel.ids.push_back(scenes[order[k]].scene_id);
  return sel;
}

}  // namespace epd::metrics
