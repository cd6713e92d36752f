#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "epd/poly.hpp"
#include "epd/scene.hpp"

namespace epd::datagen {

struct Range {
  int lo{0}, hi{0};  // inclusive bounds

  bool valid() const { return lo >= 0 && hi >= lo; }
};

struct DatagenConfig {
  int n_scenes = 100;
  Range agents_per_scene{2, 6};
  Range map_elements{2, 5};  // scenery elements beyond the maneuver lanes
  double p_lane_keep = 0.4;
  double p_left_turn = 0.2;
  double p_right_turn = 0.2;
  double p_stop = 0.2;
  double speed_change_prob = 0.5;  // within lane-keep: ramp to a new cruise speed
  double history_noise_std = 0.02;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// Exact cubic whose control points sit equally spaced on the segment.
poly::PolyCurve straight_lane(Vec2 a, Vec2 b);

// Circular arc as cubic Bezier pieces, each sweeping at most ~95 degrees.
// Positive sweep is counter-clockwise; theta0 is the start angle from center.
std::vector<poly::PolyCurve> arc_lanes(Vec2 center, double radius, double theta0,
                                       double sweep);

// Random scenery: straight / arc / S-curve lane centers and crosswalks, with
// an element count drawn from cfg.map_elements. Deterministic in the rng.
std::vector<scene::MapElement> generate_map(const DatagenConfig& cfg,
                                            std::mt19937_64& rng, int id_offset = 0);

struct SceneResult {
  scene::Scene scene;
  bool placement_truncated{false};  // fewer agents than drawn after 100 attempts
};

// One synthetic scene: agents follow lane-center paths with smoothed
// trapezoidal speed profiles; maneuver transitions start after the 5 s
// history window. Histories are 10 Hz samples with Gaussian noise fitted at
// degree 5; futures are noiseless samples fitted at degree 6 and anchored at
// the true t=5 position. Initial footprints never interpenetrate.
SceneResult generate_scene(const DatagenConfig& cfg, std::mt19937_64& rng,
                           const std::string& scene_id = "scene-0");

struct CorpusResult {
  std::vector<scene::Scene> scenes;
  int truncated_scenes{0};
};

// cfg.n_scenes scenes, parallel over scene indices; scene i draws from its
// own stream seeded by (cfg.seed, i), so serial and parallel runs agree
// byte-for-byte.
CorpusResult generate_corpus(const DatagenConfig& cfg);

}  // namespace epd::datagen
