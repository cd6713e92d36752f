#include "epd/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <utility>

#include "epd/geometry.hpp"
#include "epd/parallel.hpp"

namespace epd::datagen {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFullDuration = 11.0;       // 5 s history + 6 s future
constexpr double kEarliestTransition = 5.2;  // keeps every history at constant velocity
constexpr double kHistDt = 0.1;

Vec2 unit_vec(double heading) { return {std::cos(heading), std::sin(heading)}; }

// Constant speed, one quintic-smoothstep ramp v0 -> v1 on [t1, t2], constant
// after. The quintic 6u^5 - 15u^4 + 10u^3 has zero accel *and* jerk at the
// ends, so position is C^3 at the knots and low-degree fits stay tame.
struct SpeedProfile {
  double v0{0.0}, v1{0.0}, t1{kFullDuration}, t2{kFullDuration};

  double distance(double t) const {
    if (t <= t1) return v0 * t;
    const double span = t2 - t1;
    // Integral of the quintic smoothstep: u^4 (2.5 - 3u + u^2), equal to 1/2
    // at u = 1.
    auto ramp = [](double u) { return u * u * u * u * (2.5 + u * (u - 3.0)); };
    if (t < t2) {
      const double u = (t - t1) / span;
      return v0 * t1 + v0 * (t - t1) + (v1 - v0) * span * ramp(u);
    }
    return v0 * t1 + 0.5 * (v0 + v1) * span + v1 * (t - t2);
  }
};

// Shortest ramp keeping |accel| <= 3 and |jerk| <= 5 (quintic peaks are
// 1.875|dv|/T and ~5.77|dv|/T^2) with 10% headroom.
double ramp_duration(double dv) {
  dv = std::abs(dv);
  return std::max(0.6, 1.1 * std::max(0.625 * dv, std::sqrt(1.154 * dv)));
}

struct Segment {
  bool is_arc{false};
  Vec2 a{}, dir{};  // line: start and unit direction
  Vec2 center{};    // arc: +1 counter-clockwise travel, -1 clockwise
  double radius{0.0}, theta0{0.0}, orient{1.0};
  double length{0.0};

  Vec2 point(double s) const {
    if (!is_arc) return a + dir * s;
    const double th = theta0 + orient * s / radius;
    return center + unit_vec(th) * radius;
  }
  double heading(double s) const {
    if (!is_arc) return std::atan2(dir.y, dir.x);
    return wrap_angle(theta0 + orient * s / radius + orient * kPi / 2.0);
  }
};

struct Path {
  std::vector<Segment> segs;
  double total{0.0};

  void add_line(Vec2 start, double heading, double length) {
    segs.push_back({.a = start, .dir = unit_vec(heading), .length = length});
    total += length;
  }
  void add_arc(Vec2 center, double radius, double theta0, double orient,
               double length) {
    segs.push_back({.is_arc = true,
                    .center = center,
                    .radius = radius,
                    .theta0 = theta0,
                    .orient = orient,
                    .length = length});
    total += length;
  }

  std::pair<const Segment*, double> locate(double s) const {
    s = std::clamp(s, 0.0, total);
    for (const Segment& seg : segs) {
      if (s <= seg.length || &seg == &segs.back()) return {&seg, s};
      s -= seg.length;
    }
    return {&segs.back(), segs.back().length};
  }
  Vec2 point(double s) const {
    auto [seg, local] = locate(s);
    return seg->point(local);
  }
  double end_heading() const { return segs.back().heading(segs.back().length); }
};

enum class Maneuver { keep, turn_left, turn_right, stop };

struct AgentPlan {
  scene::AgentCategory category{scene::AgentCategory::vehicle};
  Maneuver maneuver{Maneuver::keep};
  SpeedProfile profile;
  double turn_radius{0.0};
  double turn_entry_s{0.0};  // arc starts this far along the path
};

// Draw order is fixed: category, maneuver, cruise speed, maneuver parameters.
AgentPlan draw_plan(const DatagenConfig& cfg, std::mt19937_64& rng, bool ego) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AgentPlan plan;
  if (ego) {
    plan.category = scene::AgentCategory::ego;
  } else {
    plan.category = unit(rng) < 0.8 ? scene::AgentCategory::vehicle
                                    : scene::AgentCategory::cyclist;
  }
  const bool cyclist = plan.category == scene::AgentCategory::cyclist;

  const double u = unit(rng);
  if (u < cfg.p_lane_keep) {
    plan.maneuver = Maneuver::keep;
  } else if (u < cfg.p_lane_keep + cfg.p_left_turn) {
    plan.maneuver = Maneuver::turn_left;
  } else if (u < cfg.p_lane_keep + cfg.p_left_turn + cfg.p_right_turn) {
    plan.maneuver = Maneuver::turn_right;
  } else {
    plan.maneuver = Maneuver::stop;
  }

  const double v0 = cyclist ? std::uniform_real_distribution<double>(1.5, 4.5)(rng)
                            : std::uniform_real_distribution<double>(3.0, 9.0)(rng);
  plan.profile = {v0, v0, kFullDuration, kFullDuration};

  switch (plan.maneuver) {
    case Maneuver::keep:
      if (unit(rng) < cfg.speed_change_prob) {
        const bool slow = unit(rng) < 0.5;
        const double factor =
            slow ? std::uniform_real_distribution<double>(0.5, 0.8)(rng)
                 : std::uniform_real_distribution<double>(1.2, 1.5)(rng);
        const double v1 = factor * v0;
        // Long ramps: the quintic's distance integral is itself degree 6, so
        // a ramp covering most of the future window fits almost exactly.
        const double t1 = std::uniform_real_distribution<double>(
            kEarliestTransition, 5.6)(rng);
        const double span = std::uniform_real_distribution<double>(
            std::max(3.5, ramp_duration(v1 - v0)), 5.0)(rng);
        plan.profile = {v0, v1, t1, t1 + span};
      }
      break;
    case Maneuver::turn_left:
    case Maneuver::turn_right: {
      const double radius =
          cyclist ? std::uniform_real_distribution<double>(4.0, 8.0)(rng)
                  : std::uniform_real_distribution<double>(8.0, 14.0)(rng);
      plan.turn_radius = radius;
      // Cap the cruise speed so lateral acceleration v^2/R stays below ~2.7.
      const double v = std::min(v0, 0.95 * std::sqrt(3.0 * radius));
      plan.profile = {v, v, kFullDuration, kFullDuration};
      const double t_entry = std::uniform_real_distribution<double>(
          kEarliestTransition, 6.5)(rng);
      plan.turn_entry_s = v * t_entry;
      break;
    }
    case Maneuver::stop: {
      // One long brake filling most of the window, fully at rest by 10.6 s.
      // The speed cap keeps the ~5 s ramp within the comfort bounds.
      const double v = std::min(v0, 7.0);
      const double tb = std::uniform_real_distribution<double>(
          kEarliestTransition, 5.5)(rng);
      plan.profile = {v, 0.0, tb, 10.6};
      break;
    }
  }
  return plan;
}

Path build_path(const AgentPlan& plan, const Pose& start, double needed) {
  Path path;
  if (plan.maneuver == Maneuver::turn_left ||
      plan.maneuver == Maneuver::turn_right) {
    const double sign = plan.maneuver == Maneuver::turn_left ? 1.0 : -1.0;
    const double radius = plan.turn_radius;
    path.add_line(start.position, start.heading, plan.turn_entry_s);
    const Vec2 entry = start.position + unit_vec(start.heading) * plan.turn_entry_s;
    const Vec2 center = entry + unit_vec(start.heading + sign * kPi / 2.0) * radius;
    path.add_arc(center, radius, start.heading - sign * kPi / 2.0, sign,
                 radius * kPi / 2.0);
    const Vec2 exit = path.segs.back().point(path.segs.back().length);
    path.add_line(exit, path.end_heading(), needed + 10.0);
  } else {
    path.add_line(start.position, start.heading, needed + 10.0);
  }
  return path;
}

// Lane centers tracing the first s_end meters of the path; pieces shorter
// than 1 m are dropped.
std::vector<poly::PolyCurve> lanes_along(const Path& path, double s_end) {
  std::vector<poly::PolyCurve> out;
  double off = 0.0;
  for (const Segment& seg : path.segs) {
    const double hi = std::min(seg.length, s_end - off);
    if (hi > 1.0) {
      if (!seg.is_arc) {
        out.push_back(straight_lane(seg.point(0.0), seg.point(hi)));
      } else {
        const double sweep = seg.orient * hi / seg.radius;
        auto pieces = arc_lanes(seg.center, seg.radius, seg.theta0, sweep);
        out.insert(out.end(), pieces.begin(), pieces.end());
      }
    }
    off += seg.length;
    if (off >= s_end) break;
  }
  return out;
}

}  // namespace

void DatagenConfig::validate() const {
  if (n_scenes < 1) throw ConfigError("datagen: n_scenes must be >= 1");
  if (!agents_per_scene.valid() || agents_per_scene.lo < 1)
    throw ConfigError("datagen: agents_per_scene range must satisfy 1 <= lo <= hi");
  if (!map_elements.valid())
    throw ConfigError("datagen: map_elements range must satisfy 0 <= lo <= hi");
  const double probs[] = {p_lane_keep, p_left_turn, p_right_turn, p_stop};
  double sum = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw ConfigError("datagen: maneuver probabilities must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("datagen: maneuver probabilities must sum to 1");
  if (speed_change_prob < 0.0 || speed_change_prob > 1.0)
    throw ConfigError("datagen: speed_change_prob must be in [0, 1]");
  if (history_noise_std < 0.0)
    throw ConfigError("datagen: history_noise_std must be >= 0");
}

poly::PolyCurve straight_lane(Vec2 a, Vec2 b) {
  std::vector<Vec2> cps(4);
  for (int k = 0; k < 4; ++k) cps[k] = a + (b - a) * (k / 3.0);
  return poly::PolyCurve(std::move(cps), 1.0);
}

std::vector<poly::PolyCurve> arc_lanes(Vec2 center, double radius, double theta0,
                                       double sweep) {
  if (radius <= 0.0) throw ConfigError("arc_lanes: radius must be positive");
  if (sweep == 0.0) throw ConfigError("arc_lanes: sweep must be nonzero");
  const double max_piece = 95.0 * kPi / 180.0;
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(sweep) / max_piece)));
  const double phi = sweep / n;
  // Classic circular-arc Bezier handle; radial error < 3e-4 * radius at 90 deg.
  const double handle = (4.0 / 3.0) * std::tan(std::abs(phi) / 4.0) * radius;
  const double sign = phi < 0.0 ? -1.0 : 1.0;
  auto on_circle = [&](double th) { return center + unit_vec(th) * radius; };
  auto tangent = [&](double th) { return Vec2{-std::sin(th), std::cos(th)}; };

  std::vector<poly::PolyCurve> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double ta = theta0 + i * phi;
    const double tb = ta + phi;
    std::vector<Vec2> cps = {on_circle(ta), on_circle(ta) + tangent(ta) * (sign * handle),
                             on_circle(tb) - tangent(tb) * (sign * handle), on_circle(tb)};
    out.emplace_back(std::move(cps), 1.0);
  }
  return out;
}

std::vector<scene::MapElement> generate_map(const DatagenConfig& cfg,
                                            std::mt19937_64& rng, int id_offset) {
  std::uniform_int_distribution<int> count(cfg.map_elements.lo, cfg.map_elements.hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coord(-60.0, 60.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);

  const int n = count(rng);
  std::vector<scene::MapElement> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double u = unit(rng);
    const Vec2 p{coord(rng), coord(rng)};
    const double h = angle(rng);
    const Vec2 dir = unit_vec(h);
    scene::MapCategory category = scene::MapCategory::lane_center;
    poly::PolyCurve curve = straight_lane({0.0, 0.0}, {1.0, 0.0});
    if (u < 0.4) {
      const double len = std::uniform_real_distribution<double>(30.0, 80.0)(rng);
      curve = straight_lane(p, p + dir * len);
    } else if (u < 0.65) {
      const double radius = std::uniform_real_distribution<double>(10.0, 30.0)(rng);
      const double mag =
          std::uniform_real_distribution<double>(kPi / 4.5, kPi / 2.0)(rng);
      const double sweep = (unit(rng) < 0.5 ? -1.0 : 1.0) * mag;
      curve = arc_lanes(p, radius, h, sweep).front();
    } else if (u < 0.85) {
      const double len = std::uniform_real_distribution<double>(30.0, 60.0)(rng);
      const double lateral = std::uniform_real_distribution<double>(4.0, 10.0)(rng);
      const Vec2 nrm{-dir.y, dir.x};
      std::vector<Vec2> cps = {p, p + dir * (len / 3.0) + nrm * lateral,
                               p + dir * (2.0 * len / 3.0) - nrm * lateral,
                               p + dir * len};
      curve = poly::PolyCurve(std::move(cps), 1.0);
    } else {
      const double len = std::uniform_real_distribution<double>(4.0, 8.0)(rng);
      curve = straight_lane(p - dir * (len / 2.0), p + dir * (len / 2.0));
      category = scene::MapCategory::crosswalk;
    }
    out.push_back({.id = "x" + std::to_string(id_offset + k),
                   .category = category,
                   .geometry = std::move(curve)});
  }
  return out;
}

SceneResult generate_scene(const DatagenConfig& cfg, std::mt19937_64& rng,
                           const std::string& scene_id) {
  cfg.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coord(-45.0, 45.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SceneResult result;
  result.scene.scene_id = scene_id;
  result.scene.horizon_s = 6.0;
  result.scene.eval_horizon_s = 6.0;

  const int wanted = std::uniform_int_distribution<int>(cfg.agents_per_scene.lo,
                                                        cfg.agents_per_scene.hi)(rng);
  std::vector<geometry::OrientedRect> placed;
  std::vector<scene::MapElement> lanes;
  int lane_id = 0;

  for (int i = 0; i < wanted; ++i) {
    const AgentPlan plan = draw_plan(cfg, rng, i == 0);
    const Vec2 footprint = scene::default_footprint(plan.category);

    Pose pose;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      pose.position = {coord(rng), coord(rng)};
      pose.heading = angle(rng);
      // 0.3 m buffer per side keeps the noisy fitted footprints clear too.
      const geometry::OrientedRect rect{pose.position, pose.heading,
                                        footprint.x + 0.6, footprint.y + 0.6};
      ok = std::none_of(placed.begin(), placed.end(), [&](const auto& other) {
        return geometry::rects_overlap(rect, other);
      });
      if (ok) placed.push_back(rect);
    }
    if (!ok) {
      result.placement_truncated = true;
      break;
    }

    const SpeedProfile& prof = plan.profile;
    const Path path = build_path(plan, pose, prof.distance(kFullDuration));

    std::vector<poly::TimedPoint> hist(51);
    for (int k = 0; k <= 50; ++k) {
      const double t = kHistDt * k;
      Vec2 p = path.point(prof.distance(t));
      p.x += cfg.history_noise_std * gauss(rng);
      p.y += cfg.history_noise_std * gauss(rng);
      hist[k] = {t, p};
    }
    poly::PolyCurve history = poly::fit_bayesian(
        hist, scene::kHistoryDegree, scene::kHistoryDuration,
        poly::FitConfig{.obs_noise_std = std::max(cfg.history_noise_std, 1e-5)});

    std::vector<poly::TimedPoint> fut(61);
    for (int k = 0; k <= 60; ++k) {
      const double t = scene::kHistoryDuration + kHistDt * k;
      fut[k] = {kHistDt * k, path.point(prof.distance(t))};
    }
    poly::PolyCurve future =
        poly::fit_bayesian(fut, scene::kFutureDegree, result.scene.horizon_s,
                           poly::FitConfig{.obs_noise_std = 1e-5});
    // Anchor the future at the fitted history endpoint: ground truth is then
    // continuous with the history by construction, and shares the convention
    // of generated futures, which also start at the last observed position.
    const Vec2 anchor = history.eval(scene::kHistoryDuration);
    future = future.transformed(0.0, anchor - future.eval(0.0));

    result.scene.agents.push_back({.id = "a" + std::to_string(i),
                                   .category = plan.category,
                                   .history = std::move(history),
                                   .length = footprint.x,
                                   .width = footprint.y,
                                   .future = std::move(future)});

    for (auto& curve : lanes_along(path, prof.distance(kFullDuration))) {
      lanes.push_back({.id = "lane" + std::to_string(lane_id++),
                       .category = scene::MapCategory::lane_center,
                       .geometry = std::move(curve)});
    }
  }

  auto scenery = generate_map(cfg, rng);
  result.scene.map = std::move(lanes);
  result.scene.map.insert(result.scene.map.end(),
                          std::make_move_iterator(scenery.begin()),
                          std::make_move_iterator(scenery.end()));
  scene::validate(result.scene);
  return result;
}

CorpusResult generate_corpus(const DatagenConfig& cfg) {
  cfg.validate();
  std::vector<SceneResult> results(cfg.n_scenes);
  parallel_for(cfg.n_scenes, [&](std::ptrdiff_t i) {
    auto rng = make_rng({cfg.seed, static_cast<std::uint64_t>(i), 0xDA7A});
    char name[32];
    std::snprintf(name, sizeof name, "scene-%06lld", static_cast<long long>(i));
    results[i] = generate_scene(cfg, rng, name);
  });

  CorpusResult out;
  out.scenes.reserve(results.size());
  for (auto& r : results) {
    out.truncated_scenes += r.placement_truncated ? 1 : 0;
    out.scenes.push_back(std::move(r.scene));
  }
  return out;
}

}  // namespace epd::datagen
