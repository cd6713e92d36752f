#include "epd/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "epd/checkpoint.hpp"
#include "epd/common.hpp"
#include "epd/datagen.hpp"
#include "epd/metrics.hpp"
#include "epd/net.hpp"
#include "epd/parallel.hpp"
#include "epd/sampler.hpp"
#include "epd/scene.hpp"
#include "epd/train.hpp"
#include "json.hpp"

namespace epd::cli {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config file handling. One JSON document with optional sections
// model/train/sample/metrics/datagen; every section is parsed strictly so a
// typo fails loudly instead of silently running with defaults.

double as_num(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return v.get<int>();
}

std::string as_str(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a string");
  return v.get<std::string>();
}

datagen::Range as_range(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
      !v[1].is_number_integer())
    throw ConfigError(where + ": expected [lo, hi]");
  return {v[0].get<int>(), v[1].get<int>()};
}

void apply_model(const json& sec, net::ModelConfig& c) {
  for (const auto& [key, v] : sec.items()) {
    const std::string where = "config.model." + key;
    if (key == "hidden_dim") c.hidden_dim = as_int(v, where);
    else if (key == "n_enc_blocks") c.n_enc_blocks = as_int(v, where);
    else if (key == "n_denoise_blocks") c.n_denoise_blocks = as_int(v, where);
    else if (key == "n_heads") c.n_heads = as_int(v, where);
    else if (key == "dropout") c.dropout = as_num(v, where);
    else if (key == "diffusion_steps") c.diffusion_steps = as_int(v, where);
    else if (key == "representation")
      c.representation = net::representation_from_string(as_str(v, where));
    else throw ConfigError("config.model: unknown key '" + key + "'");
  }
}

void apply_train(const json& sec, train::TrainConfig& c) {
  for (const auto& [key, v] : sec.items()) {
    const std::string where = "config.train." + key;
    if (key == "lr") c.lr = as_num(v, where);
    else if (key == "epochs") c.epochs = as_int(v, where);
    else if (key == "warmup_epochs") c.warmup_epochs = as_int(v, where);
    else if (key == "batch_size") c.batch_size = as_int(v, where);
    else if (key == "weight_decay") c.weight_decay = as_num(v, where);
    else if (key == "beta1") c.beta1 = as_num(v, where);
    else if (key == "beta2") c.beta2 = as_num(v, where);
    else if (key == "adam_eps") c.adam_eps = as_num(v, where);
    else throw ConfigError("config.train: unknown key '" + key + "'");
  }
}

void apply_sample(const json& sec, sampler::SampleConfig& c) {
  for (const auto& [key, v] : sec.items()) {
    const std::string where = "config.sample." + key;
    if (key == "ddim_steps") c.ddim_steps = as_int(v, where);
    else if (key == "n_samples") c.n_samples = as_int(v, where);
    else if (key == "x0_clip") c.x0_clip = as_num(v, where);
    else throw ConfigError("config.sample: unknown key '" + key + "'");
  }
}

void apply_metrics(const json& sec, metrics::MetricConfig& c) {
  for (const auto& [key, v] : sec.items()) {
    const std::string where = "config.metrics." + key;
    if (key == "n_samples") c.n_samples = as_int(v, where);
    else if (key == "dt") c.dt = as_num(v, where);
    else if (key == "n_bins") c.n_bins = as_int(v, where);
    else if (key == "smoothing") c.smoothing = as_num(v, where);
    else if (key == "speed_max") c.speed_max = as_num(v, where);
    else if (key == "accel_max") c.accel_max = as_num(v, where);
    else if (key == "jerk_max") c.jerk_max = as_num(v, where);
    else if (key == "heading_rate_max") c.heading_rate_max = as_num(v, where);
    else if (key == "agent_dist_max") c.agent_dist_max = as_num(v, where);
    else if (key == "lane_dist_max") c.lane_dist_max = as_num(v, where);
    else if (key == "offlane_threshold") c.offlane_threshold = as_num(v, where);
    else if (key == "w_kinematic") c.w_kinematic = as_num(v, where);
    else if (key == "w_interactive") c.w_interactive = as_num(v, where);
    else if (key == "w_map") c.w_map = as_num(v, where);
    else if (key == "accel_band") c.accel_band = as_num(v, where);
    else if (key == "jerk_band") c.jerk_band = as_num(v, where);
    else throw ConfigError("config.metrics: unknown key '" + key + "'");
  }
}

void apply_datagen(const json& sec, datagen::DatagenConfig& c) {
  for (const auto& [key, v] : sec.items()) {
    const std::string where = "config.datagen." + key;
    if (key == "n_scenes") c.n_scenes = as_int(v, where);
    else if (key == "agents_per_scene") c.agents_per_scene = as_range(v, where);
    else if (key == "map_elements") c.map_elements = as_range(v, where);
    else if (key == "p_lane_keep") c.p_lane_keep = as_num(v, where);
    else if (key == "p_left_turn") c.p_left_turn = as_num(v, where);
    else if (key == "p_right_turn") c.p_right_turn = as_num(v, where);
    else if (key == "p_stop") c.p_stop = as_num(v, where);
    else if (key == "speed_change_prob") c.speed_change_prob = as_num(v, where);
    else if (key == "history_noise_std") c.history_noise_std = as_num(v, where);
    else throw ConfigError("config.datagen: unknown key '" + key + "'");
  }
}

struct Resolved {
  net::ModelConfig model;
  train::TrainConfig train;
  sampler::SampleConfig sample;
  metrics::MetricConfig metrics;
  datagen::DatagenConfig datagen;
};

Resolved load_config(const std::string& path) {
  Resolved r;
  if (path.empty()) return r;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw ConfigError(path + ": expected a JSON object");
  for (const auto& [key, sec] : doc.items()) {
    if (!sec.is_object()) throw ConfigError("config." + key + ": expected an object");
    if (key == "model") apply_model(sec, r.model);
    else if (key == "train") apply_train(sec, r.train);
    else if (key == "sample") apply_sample(sec, r.sample);
    else if (key == "metrics") apply_metrics(sec, r.metrics);
    else if (key == "datagen") apply_datagen(sec, r.datagen);
    else throw ConfigError("config: unknown section '" + key + "'");
  }
  return r;
}

ordered_json model_json(const net::ModelConfig& c) {
  return {{"hidden_dim", c.hidden_dim},
          {"n_enc_blocks", c.n_enc_blocks},
          {"n_denoise_blocks", c.n_denoise_blocks},
          {"n_heads", c.n_heads},
          {"dropout", c.dropout},
          {"diffusion_steps", c.diffusion_steps},
          {"representation", net::to_string(c.representation)}};
}

ordered_json train_json(const train::TrainConfig& c) {
  return {{"lr", c.lr},
          {"epochs", c.epochs},
          {"warmup_epochs", c.warmup_epochs},
          {"batch_size", c.batch_size},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps}};
}

ordered_json sample_json(const sampler::SampleConfig& c) {
  return {{"ddim_steps", c.ddim_steps},
          {"n_samples", c.n_samples},
          {"x0_clip", c.x0_clip}};
}

ordered_json metrics_json(const metrics::MetricConfig& c) {
  return {{"n_samples", c.n_samples},
          {"dt", c.dt},
          {"n_bins", c.n_bins},
          {"smoothing", c.smoothing},
          {"speed_max", c.speed_max},
          {"accel_max", c.accel_max},
          {"jerk_max", c.jerk_max},
          {"heading_rate_max", c.heading_rate_max},
          {"agent_dist_max", c.agent_dist_max},
          {"lane_dist_max", c.lane_dist_max},
          {"offlane_threshold", c.offlane_threshold},
          {"w_kinematic", c.w_kinematic},
          {"w_interactive", c.w_interactive},
          {"w_map", c.w_map},
          {"accel_band", c.accel_band},
          {"jerk_band", c.jerk_band}};
}

ordered_json datagen_json(const datagen::DatagenConfig& c) {
  return {{"n_scenes", c.n_scenes},
          {"agents_per_scene", {c.agents_per_scene.lo, c.agents_per_scene.hi}},
          {"map_elements", {c.map_elements.lo, c.map_elements.hi}},
          {"p_lane_keep", c.p_lane_keep},
          {"p_left_turn", c.p_left_turn},
          {"p_right_turn", c.p_right_turn},
          {"p_stop", c.p_stop},
          {"speed_change_prob", c.speed_change_prob},
          {"history_noise_std", c.history_noise_std},
          {"seed", c.seed}};
}

// ---------------------------------------------------------------------------
// Shared plumbing.

// Refuses to write an artifact over one of the inputs.
void guard_output(const std::string& out, std::initializer_list<std::string> inputs) {
  for (const std::string& in : inputs) {
    if (in.empty() || out.empty()) continue;
    std::error_code ec;
    if (fs::exists(out, ec) && fs::exists(in, ec) && fs::equivalent(out, in, ec) && !ec)
      throw ConfigError("--out '" + out + "' would overwrite input '" + in + "'");
  }
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

ordered_json cp_json(const poly::PolyCurve& c) {
  ordered_json arr = ordered_json::array();
  for (const Vec2& p : c.control_points()) arr.push_back({p.x, p.y});
  return arr;
}

ordered_json traj_json(const scene::FutureTraj& t) {
  ordered_json j;
  if (const auto* c = std::get_if<poly::PolyCurve>(&t)) {
    j["future_cp"] = cp_json(*c);
  } else {
    const auto& pt = std::get<scene::PointTrajectory>(t);
    j["dt"] = pt.dt;
    ordered_json arr = ordered_json::array();
    for (const Vec2& p : pt.points) arr.push_back({p.x, p.y});
    j["points"] = arr;
  }
  return j;
}

// Generated futures keyed by scene id, as written by `sample`.
struct ScenePred {
  std::vector<std::string> agent_ids;
  std::vector<std::vector<scene::FutureTraj>> samples;  // [sample][agent]
};

scene::FutureTraj traj_from_json(const json& j, double horizon,
                                 const std::string& where) {
  if (!j.is_object()) throw DataError(where + ": expected an object");
  if (j.contains("future_cp")) {
    const json& cp = j["future_cp"];
    if (!cp.is_array() || cp.empty()) throw DataError(where + ".future_cp: expected points");
    std::vector<Vec2> pts;
    for (const json& p : cp) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        throw DataError(where + ".future_cp: expected [x, y] pairs");
      pts.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return poly::PolyCurve(pts, horizon);
  }
  if (j.contains("points")) {
    scene::PointTrajectory pt;
    pt.dt = as_num(j.value("dt", json(0.1)), where + ".dt");
    const json& xy = j["points"];
    if (!xy.is_array()) throw DataError(where + ".points: expected an array");
    for (const json& p : xy) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        throw DataError(where + ".points: expected [x, y] pairs");
      pt.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return pt;
  }
  throw DataError(where + ": expected 'future_cp' or 'points'");
}

std::map<std::string, ScenePred> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::map<std::string, ScenePred> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + " line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": invalid JSON: " + std::string(e.what()));
    }
    if (!j.is_object() || !j.contains("scene_id") || !j["scene_id"].is_string())
      throw DataError(where + ": expected an object with scene_id");
    const std::string id = j["scene_id"].get<std::string>();
    const double horizon = as_num(j.value("horizon_s", json(6.0)), where + ".horizon_s");
    if (!j.contains("samples") || !j["samples"].is_array())
      throw DataError(where + ": expected a samples array");
    ScenePred pred;
    for (std::size_t si = 0; si < j["samples"].size(); ++si) {
      const json& sample = j["samples"][si];
      if (!sample.is_array()) throw DataError(where + ": each sample must be an array");
      std::vector<scene::FutureTraj> trajs;
      std::vector<std::string> ids;
      for (std::size_t ai = 0; ai < sample.size(); ++ai) {
        const std::string aw = where + " sample " + std::to_string(si) + " agent " +
                               std::to_string(ai);
        const json& ja = sample[ai];
        if (!ja.is_object() || !ja.contains("agent_id") || !ja["agent_id"].is_string())
          throw DataError(aw + ": expected an object with agent_id");
        ids.push_back(ja["agent_id"].get<std::string>());
        trajs.push_back(traj_from_json(ja, horizon, aw));
      }
      if (si == 0) pred.agent_ids = ids;
      else if (ids != pred.agent_ids)
        throw DataError(where + ": samples disagree on agent ids");
      pred.samples.push_back(std::move(trajs));
    }
    if (!out.emplace(id, std::move(pred)).second)
      throw DataError(where + ": duplicate scene_id '" + id + "'");
  }
  return out;
}

ordered_json report_json(const std::string& scene_id, const metrics::MetricReport& r) {
  ordered_json j;
  j["scene_id"] = scene_id;
  j["realism_meta"] = r.realism_meta;
  j["kinematic"] = r.kinematic;
  if (r.interactive) j["interactive"] = *r.interactive;
  if (r.map_adherence) j["map_adherence"] = *r.map_adherence;
  j["minade_m"] = r.minade_m;
  j["coverage_m"] = r.coverage_m;
  j["speed_score"] = r.speed_score;
  j["accel_score"] = r.accel_score;
  j["jerk_score"] = r.jerk_score;
  j["heading_rate_score"] = r.heading_rate_score;
  if (r.agent_distance_score) j["agent_distance_score"] = *r.agent_distance_score;
  if (r.collision_score) j["collision_score"] = *r.collision_score;
  if (r.lane_distance_score) j["lane_distance_score"] = *r.lane_distance_score;
  if (r.offlane_score) j["offlane_score"] = *r.offlane_score;
  return j;
}

std::string summary_csv(const std::vector<metrics::MetricReport>& reports) {
  using Getter = std::function<std::optional<double>(const metrics::MetricReport&)>;
  const std::vector<std::pair<std::string, Getter>> cols = {
      {"realism_meta", [](const auto& r) { return std::optional<double>(r.realism_meta); }},
      {"kinematic", [](const auto& r) { return std::optional<double>(r.kinematic); }},
      {"interactive", [](const auto& r) { return r.interactive; }},
      {"map_adherence", [](const auto& r) { return r.map_adherence; }},
      {"minade_m", [](const auto& r) { return std::optional<double>(r.minade_m); }},
      {"coverage_m", [](const auto& r) { return std::optional<double>(r.coverage_m); }},
      {"speed_score", [](const auto& r) { return std::optional<double>(r.speed_score); }},
      {"accel_score", [](const auto& r) { return std::optional<double>(r.accel_score); }},
      {"jerk_score", [](const auto& r) { return std::optional<double>(r.jerk_score); }},
      {"heading_rate_score",
       [](const auto& r) { return std::optional<double>(r.heading_rate_score); }},
      {"agent_distance_score", [](const auto& r) { return r.agent_distance_score; }},
      {"collision_score", [](const auto& r) { return r.collision_score; }},
      {"lane_distance_score", [](const auto& r) { return r.lane_distance_score; }},
      {"offlane_score", [](const auto& r) { return r.offlane_score; }},
  };
  std::string csv = "metric,mean,std,n\n";
  char buf[160];
  for (const auto& [name, get] : cols) {
    double sum = 0.0, sum2 = 0.0;
    int n = 0;
    for (const auto& r : reports) {
      if (const std::optional<double> v = get(r)) {
        sum += *v;
        sum2 += *v * *v;
        ++n;
      }
    }
    if (n == 0) {
      std::snprintf(buf, sizeof(buf), "%s,,,0\n", name.c_str());
    } else {
      const double mean = sum / n;
      const double var = std::max(0.0, sum2 / n - mean * mean);
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%d\n", name.c_str(), mean,
                    std::sqrt(var), n);
    }
    csv += buf;
  }
  return csv;
}

// ---------------------------------------------------------------------------
// SVG plotting.

struct Svg {
  double width, height;
  std::ostringstream body;

  Svg(double w, double h) : width(w), height(h) {}

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
  }

  void rect(double x, double y, double w, double h, const std::string& fill,
            double opacity = 1.0) {
    body << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
         << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\" fill-opacity=\""
         << opacity << "\"/>\n";
  }

  void polyline(const std::vector<Vec2>& pts, const std::string& color, double w,
                double opacity = 1.0, const std::string& dash = "") {
    if (pts.size() < 2) return;
    body << "<polyline points=\"";
    for (const Vec2& p : pts) body << fmt(p.x) << "," << fmt(p.y) << " ";
    body << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << fmt(w)
         << "\" stroke-opacity=\"" << opacity << "\"";
    if (!dash.empty()) body << " stroke-dasharray=\"" << dash << "\"";
    body << "/>\n";
  }

  void circle(double x, double y, double r, const std::string& fill) {
    body << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"" << fmt(r)
         << "\" fill=\"" << fill << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, double size = 12.0) {
    body << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\""
         << fmt(size) << "\" font-family=\"sans-serif\" fill=\"#333\">" << s
         << "</text>\n";
  }

  std::string finish() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
        << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << " "
        << fmt(height) << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body.str() << "</svg>\n";
    return out.str();
  }
};

// World coordinates (y up) to screen (y down), uniform scale.
struct WorldFrame {
  double x0, y0, scale, ox, oy;

  Vec2 map(Vec2 p) const { return {ox + (p.x - x0) * scale, oy - (p.y - y0) * scale}; }
};

std::vector<Vec2> curve_points(const poly::PolyCurve& c, int n = 80) {
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) pts.push_back(c.eval(c.duration() * i / n));
  return pts;
}

std::vector<Vec2> traj_points(const scene::FutureTraj& t, int n = 80) {
  if (const auto* c = std::get_if<poly::PolyCurve>(&t)) return curve_points(*c, n);
  return std::get<scene::PointTrajectory>(t).points;
}

std::string scene_svg(const scene::Scene& s,
                      const std::vector<std::vector<scene::FutureTraj>>& samples) {
  std::vector<std::vector<Vec2>> map_lines, histories, futures, sampled;
  for (const auto& m : s.map) map_lines.push_back(curve_points(m.geometry));
  for (const auto& a : s.agents) {
    histories.push_back(curve_points(a.history));
    if (a.future) futures.push_back(curve_points(*a.future));
  }
  for (const auto& sample : samples)
    for (const auto& t : sample) sampled.push_back(traj_points(t));

  double x0 = 1e30, y0 = 1e30, x1 = -1e30, y1 = -1e30;
  auto grow = [&](const std::vector<std::vector<Vec2>>& group) {
    for (const auto& line : group)
      for (const Vec2& p : line) {
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
      }
  };
  grow(map_lines);
  grow(histories);
  grow(futures);
  grow(sampled);
  if (x1 < x0) { x0 = y0 = -1.0; x1 = y1 = 1.0; }
  const double pad = 5.0;
  x0 -= pad; y0 -= pad; x1 += pad; y1 += pad;

  const double W = 800.0, H = 800.0;
  const double scale = std::min(W / (x1 - x0), H / (y1 - y0));
  const WorldFrame f{x0, y0, scale, 0.5 * (W - (x1 - x0) * scale),
                     H - 0.5 * (H - (y1 - y0) * scale)};
  auto to_screen = [&](const std::vector<Vec2>& pts) {
    std::vector<Vec2> out;
    out.reserve(pts.size());
    for (const Vec2& p : pts) out.push_back(f.map(p));
    return out;
  };

  Svg svg(W, H);
  for (std::size_t i = 0; i < s.map.size(); ++i) {
    const bool crosswalk = s.map[i].category == scene::MapCategory::crosswalk;
    svg.polyline(to_screen(map_lines[i]), "#b0b0b0", crosswalk ? 4.0 : 2.0, 1.0,
                 crosswalk ? "6,4" : "");
  }
  for (const auto& line : sampled) svg.polyline(to_screen(line), "#ff8c00", 1.2, 0.5);
  for (const auto& line : futures) svg.polyline(to_screen(line), "#2e8b57", 2.0);
  for (const auto& line : histories) {
    const auto pts = to_screen(line);
    svg.polyline(pts, "#1f5fbf", 2.0);
    if (!pts.empty()) svg.circle(pts.back().x, pts.back().y, 3.0, "#1f5fbf");
  }
  svg.text(10.0, 20.0, s.scene_id + "  (gray map, blue history, green truth, orange samples)");
  return svg.finish();
}

std::string kinematics_svg(const std::vector<scene::FutureTraj>& trajs,
                           const std::string& color, double horizon,
                           const metrics::MetricConfig& mc, const std::string& title) {
  struct Panel {
    std::string label;
    double band;  // comfort band upper edge, 0 = none
    std::vector<std::vector<double>> series;
  };
  std::vector<Panel> panels = {{"heading [rad]", 0.0, {}},
                               {"speed [m/s]", 0.0, {}},
                               {"|accel| [m/s^2]", mc.accel_band, {}},
                               {"|jerk| [m/s^3]", mc.jerk_band, {}}};
  for (const auto& t : trajs) {
    const auto feats = metrics::kinematic_features(t, mc.dt, horizon);
    panels[0].series.push_back(metrics::sample_traj(t, mc.dt, horizon).heading);
    panels[1].series.push_back(feats.speed);
    panels[2].series.push_back(feats.accel);
    panels[3].series.push_back(feats.jerk);
  }

  const double W = 760.0, panel_h = 150.0, left = 60.0, top = 30.0, gap = 30.0;
  const double H = top + 4 * panel_h + 3 * gap + 30.0;
  Svg svg(W, H);
  svg.text(left, 18.0, title);
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const Panel& panel = panels[pi];
    const double py = top + pi * (panel_h + gap);
    double lo = 0.0, hi = 1e-9;
    for (const auto& s : panel.series)
      for (double v : s) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    hi = std::max(hi, panel.band * 1.1);
    if (hi - lo < 1e-9) hi = lo + 1.0;
    auto ymap = [&](double v) { return py + panel_h * (1.0 - (v - lo) / (hi - lo)); };
    auto xmap = [&](std::size_t i, std::size_t n) {
      return left + (W - left - 20.0) * (n > 1 ? double(i) / double(n - 1) : 0.0);
    };
    svg.rect(left, py, W - left - 20.0, panel_h, "#f7f7f7");
    if (panel.band > 0.0 && panel.band < hi)
      svg.rect(left, ymap(panel.band), W - left - 20.0, ymap(0.0) - ymap(panel.band),
               "#c8e6c9", 0.6);
    for (const auto& series : panel.series) {
      std::vector<Vec2> pts;
      for (std::size_t i = 0; i < series.size(); ++i)
        pts.push_back({xmap(i, series.size()), ymap(series[i])});
      svg.polyline(pts, color, 1.2, 0.7);
    }
    svg.text(left, py - 6.0, panel.label);
    svg.text(8.0, ymap(lo), Svg::fmt(lo), 10.0);
    svg.text(8.0, ymap(hi) + 10.0, Svg::fmt(hi), 10.0);
  }
  svg.text(left, H - 8.0, "t = 0 .. " + Svg::fmt(horizon) + " s", 10.0);
  return svg.finish();
}

// ---------------------------------------------------------------------------
// Subcommands.

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool print_config = false;
};

bool print_config(const Common& com, ordered_json rc) {
  if (!com.print_config) return false;
  std::cout << rc.dump(2) << "\n";
  return true;
}

int cmd_datagen(Resolved cfg, const Common& com, const std::string& out,
                int scenes_flag) {
  if (scenes_flag >= 0) cfg.datagen.n_scenes = scenes_flag;
  cfg.datagen.seed = com.seed;
  cfg.datagen.validate();
  guard_output(out, {com.config});
  if (print_config(com, {{"subcommand", "datagen"},
                         {"out", out},
                         {"seed", com.seed},
                         {"datagen", datagen_json(cfg.datagen)}}))
    return 0;
  const datagen::CorpusResult res = datagen::generate_corpus(cfg.datagen);
  scene::write_scenes(res.scenes, out);
  std::printf("wrote %zu scenes to %s (%d truncated placements)\n", res.scenes.size(),
              out.c_str(), res.truncated_scenes);
  return 0;
}

int cmd_train(Resolved cfg, const Common& com, const std::string& data,
              const std::string& out, int epochs_flag, const std::string& rep_flag) {
  if (epochs_flag >= 0) cfg.train.epochs = epochs_flag;
  if (!rep_flag.empty())
    cfg.model.representation = net::representation_from_string(rep_flag);
  cfg.train.seed = com.seed;
  cfg.model.validate();
  cfg.train.validate();
  guard_output(out, {data, com.config});
  if (print_config(com, {{"subcommand", "train"},
                         {"data", data},
                         {"out", out},
                         {"seed", com.seed},
                         {"model", model_json(cfg.model)},
                         {"train", train_json(cfg.train)}}))
    return 0;
  const std::vector<scene::Scene> scenes = scene::read_scenes(data);
  net::ModelParams params = net::init_params(cfg.model, com.seed);
  std::printf("training %s model: %zu parameters, %zu scenes, %d epochs\n",
              net::to_string(cfg.model.representation).c_str(), net::param_count(params),
              scenes.size(), cfg.train.epochs);
  const train::TrainResult result = train::train(params, scenes, cfg.train);
  for (const auto& ep : result.epochs)
    std::printf("epoch %3d/%d  loss %.6f  lr %.3e\n", ep.epoch + 1, cfg.train.epochs,
                ep.mean_loss, ep.lr);
  ckpt::save(out, params);
  std::printf("saved checkpoint to %s (%d scenes used, %d skipped)\n", out.c_str(),
              result.scenes_used, result.scenes_skipped);
  return 0;
}

int cmd_sample(Resolved cfg, const Common& com, const std::string& data,
               const std::string& params_path, const std::string& out, int samples_flag,
               int ddim_flag, double horizon_flag) {
  if (samples_flag >= 0) cfg.sample.n_samples = samples_flag;
  if (ddim_flag >= 0) cfg.sample.ddim_steps = ddim_flag;
  cfg.sample.seed = com.seed;
  guard_output(out, {data, params_path, com.config});
  if (print_config(com, {{"subcommand", "sample"},
                         {"data", data},
                         {"params", params_path},
                         {"out", out},
                         {"seed", com.seed},
                         {"horizon", horizon_flag},
                         {"sample", sample_json(cfg.sample)}}))
    return 0;
  std::vector<scene::Scene> scenes = scene::read_scenes(data);
  const net::ModelParams params = ckpt::load(params_path);
  cfg.sample.validate(params.config.diffusion_steps);
  std::string lines;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    scene::Scene& s = scenes[i];
    if (horizon_flag > 0.0) s.horizon_s = horizon_flag;
    sampler::SampleConfig sc = cfg.sample;
    sc.seed = mix_seed({com.seed, static_cast<std::uint64_t>(i)});
    const sampler::SceneSamples res = sampler::generate(s, params, sc);
    ordered_json line;
    line["scene_id"] = s.scene_id;
    line["horizon_s"] = s.horizon_s;
    line["samples"] = ordered_json::array();
    for (const auto& sample : res.trajs) {
      ordered_json js = ordered_json::array();
      for (std::size_t k = 0; k < sample.size(); ++k) {
        ordered_json ja;
        ja["agent_id"] = s.agents[k].id;
        ja.update(traj_json(sample[k]));
        js.push_back(std::move(ja));
      }
      line["samples"].push_back(std::move(js));
    }
    lines += line.dump();
    lines += "\n";
  }
  write_text(out, lines);
  std::printf("wrote %d samples for %zu scenes to %s\n", cfg.sample.n_samples,
              scenes.size(), out.c_str());
  return 0;
}

int cmd_eval(Resolved cfg, const Common& com, const std::string& data,
             const std::string& out_dir, const std::string& pred_path, bool cv,
             const std::string& params_path, int samples_flag, int ddim_flag,
             double horizon_flag) {
  const int n_sources = int(!pred_path.empty()) + int(cv) + int(!params_path.empty());
  if (n_sources != 1)
    throw ConfigError("eval: exactly one of --pred, --cv, --params is required");
  if (samples_flag >= 0) {
    cfg.metrics.n_samples = samples_flag;
    cfg.sample.n_samples = samples_flag;
  }
  if (ddim_flag >= 0) cfg.sample.ddim_steps = ddim_flag;
  cfg.metrics.validate();
  const std::string source = !pred_path.empty() ? "pred" : (cv ? "cv" : "model");
  if (print_config(com, {{"subcommand", "eval"},
                         {"data", data},
                         {"out", out_dir},
                         {"seed", com.seed},
                         {"source", source},
                         {"pred", pred_path},
                         {"params", params_path},
                         {"horizon", horizon_flag},
                         {"sample", sample_json(cfg.sample)},
                         {"metrics", metrics_json(cfg.metrics)}}))
    return 0;
  std::vector<scene::Scene> scenes = scene::read_scenes(data);
  if (horizon_flag > 0.0)
    for (auto& s : scenes) s.eval_horizon_s = horizon_flag;

  std::map<std::string, ScenePred> preds;
  std::vector<const ScenePred*> pred_of(scenes.size(), nullptr);
  if (!pred_path.empty()) {
    preds = read_predictions(pred_path);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const auto it = preds.find(scenes[i].scene_id);
      if (it == preds.end())
        throw DataError("no samples for scene '" + scenes[i].scene_id + "' in " +
                        pred_path);
      std::vector<std::string> ids;
      for (const auto& a : scenes[i].agents) ids.push_back(a.id);
      if (!it->second.agent_ids.empty() && it->second.agent_ids != ids)
        throw DataError("agent ids for scene '" + scenes[i].scene_id +
                        "' do not match the data file");
      pred_of[i] = &it->second;
    }
  }
  std::optional<net::ModelParams> params;
  if (!params_path.empty()) {
    params = ckpt::load(params_path);
    cfg.sample.validate(params->config.diffusion_steps);
  }

  std::vector<metrics::MetricReport> reports(scenes.size());
  parallel_for(static_cast<std::ptrdiff_t>(scenes.size()), [&](std::ptrdiff_t i) {
    const scene::Scene& s = scenes[i];
    std::vector<std::vector<scene::FutureTraj>> samples;
    if (pred_of[i] != nullptr) {
      samples = pred_of[i]->samples;
    } else if (cv) {
      std::vector<scene::FutureTraj> one;
      for (auto& c : scene::constant_velocity_rollout(s)) one.push_back(std::move(c));
      samples.assign(cfg.metrics.n_samples, one);
    } else {
      sampler::SampleConfig sc = cfg.sample;
      sc.seed = mix_seed({com.seed, static_cast<std::uint64_t>(i)});
      samples = sampler::generate(s, *params, sc).trajs;
    }
    reports[i] = metrics::compute_report(s, samples, cfg.metrics);
  });

  fs::create_directories(out_dir);
  std::string lines;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    lines += report_json(scenes[i].scene_id, reports[i]).dump();
    lines += "\n";
  }
  const std::string reports_path = (fs::path(out_dir) / "reports.jsonl").string();
  const std::string csv_path = (fs::path(out_dir) / "summary.csv").string();
  write_text(reports_path, lines);
  write_text(csv_path, summary_csv(reports));
  double meta = 0.0;
  for (const auto& r : reports) meta += r.realism_meta;
  std::printf("evaluated %zu scenes (%s source): realism_meta mean %.4f\n",
              scenes.size(), source.c_str(),
              reports.empty() ? 0.0 : meta / double(reports.size()));
  std::printf("wrote %s and %s\n", reports_path.c_str(), csv_path.c_str());
  return 0;
}

int cmd_select_hard(Resolved cfg, const Common& com, const std::string& data,
                    const std::string& out, int n) {
  cfg.metrics.validate();
  if (n < 1) throw ConfigError("select-hard: --n must be >= 1");
  guard_output(out, {data, com.config});
  if (print_config(com, {{"subcommand", "select-hard"},
                         {"data", data},
                         {"out", out},
                         {"n", n},
                         {"metrics", metrics_json(cfg.metrics)}}))
    return 0;
  const std::vector<scene::Scene> scenes = scene::read_scenes(data);
  const metrics::Selection sel = metrics::select_challenging(scenes, n, cfg.metrics);
  std::string lines;
  for (const std::string& id : sel.ids) {
    lines += id;
    lines += "\n";
  }
  write_text(out, lines);
  if (sel.truncated)
    std::fprintf(stderr, "warning: requested %d scenes but the corpus has %zu\n", n,
                 scenes.size());
  std::printf("wrote %zu scene ids to %s\n", sel.ids.size(), out.c_str());
  return 0;
}

std::vector<int> parse_k_list(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const int k = std::stoi(item, &pos);
      if (pos != item.size() || k < 1) throw std::invalid_argument(item);
      ks.push_back(k);
    } catch (const std::exception&) {
      throw ConfigError("bench: bad --k-list entry '" + item + "'");
    }
  }
  if (ks.empty()) throw ConfigError("bench: --k-list is empty");
  return ks;
}

int cmd_bench(Resolved cfg, const Common& com, const std::string& params_path,
              const std::string& out, const std::string& k_list, int n_samples,
              int n_agents, int n_map, int reps) {
  const std::vector<int> ks = parse_k_list(k_list);
  if (reps < 1) throw ConfigError("bench: --reps must be >= 1");
  if (n_samples < 1) throw ConfigError("bench: --samples must be >= 1");
  if (n_agents < 1 || n_map < 0) throw ConfigError("bench: bad scene size");
  if (print_config(com, {{"subcommand", "bench"},
                         {"params", params_path},
                         {"out", out},
                         {"seed", com.seed},
                         {"k_list", ks},
                         {"samples", n_samples},
                         {"agents", n_agents},
                         {"map_elements", n_map},
                         {"reps", reps},
                         {"model", model_json(cfg.model)}}))
    return 0;

  datagen::DatagenConfig dg;
  dg.n_scenes = 1;
  dg.agents_per_scene = {n_agents, n_agents};
  dg.map_elements = {n_map, n_map};
  dg.seed = com.seed;
  auto rng = make_rng({com.seed, 0xBE9Cu});
  scene::Scene s = datagen::generate_scene(dg, rng, "bench-0").scene;
  if (static_cast<int>(s.map.size()) > n_map)
    s.map.erase(s.map.begin() + n_map, s.map.end());

  const net::ModelParams params =
      params_path.empty() ? net::init_params(cfg.model, com.seed) : ckpt::load(params_path);
  std::printf("bench scene: %zu agents, %zu map elements; %d samples, %d reps, %d threads\n",
              s.agents.size(), s.map.size(), n_samples, reps, thread_count());

  std::string csv = "k,ms\n";
  char buf[64];
  for (const int k : ks) {
    sampler::SampleConfig sc;
    sc.ddim_steps = k;
    sc.n_samples = n_samples;
    sc.seed = com.seed;
    sc.validate(params.config.diffusion_steps);
    for (int w = 0; w < 2; ++w) sampler::generate(s, params, sc);
    std::vector<double> ms;
    for (int r = 0; r < reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      sampler::generate(s, params, sc);
      const auto t1 = std::chrono::steady_clock::now();
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    const std::size_t n = ms.size();
    const double median = (n % 2 == 1) ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
    std::snprintf(buf, sizeof(buf), "%d,%.3f\n", k, median);
    csv += buf;
    std::printf("K=%-4d  %10.3f ms\n", k, median);
  }
  if (!out.empty()) {
    write_text(out, csv);
    std::printf("wrote %s\n", out.c_str());
  }
  return 0;
}

int cmd_plot(Resolved cfg, const Common& com, const std::string& data,
             const std::string& out_dir, const std::string& scene_id,
             const std::string& pred_path) {
  cfg.metrics.validate();
  if (print_config(com, {{"subcommand", "plot"},
                         {"data", data},
                         {"out", out_dir},
                         {"scene", scene_id},
                         {"pred", pred_path},
                         {"metrics", metrics_json(cfg.metrics)}}))
    return 0;
  const std::vector<scene::Scene> scenes = scene::read_scenes(data);
  if (scenes.empty()) throw DataError(data + ": no scenes");
  const scene::Scene* sp = &scenes.front();
  if (!scene_id.empty()) {
    sp = nullptr;
    for (const auto& s : scenes)
      if (s.scene_id == scene_id) sp = &s;
    if (sp == nullptr) throw DataError("scene '" + scene_id + "' not found in " + data);
  }

  std::vector<std::vector<scene::FutureTraj>> samples;
  if (!pred_path.empty()) {
    const auto preds = read_predictions(pred_path);
    const auto it = preds.find(sp->scene_id);
    if (it == preds.end())
      throw DataError("no samples for scene '" + sp->scene_id + "' in " + pred_path);
    samples = it->second.samples;
  }

  // Kinematics panels show the sampled futures when present, otherwise the
  // ground truth, otherwise the observed histories.
  std::vector<scene::FutureTraj> kin_trajs;
  std::string kin_color = "#ff8c00";
  double kin_horizon = sp->horizon_s;
  if (!samples.empty()) {
    for (const auto& sample : samples)
      for (const auto& t : sample) kin_trajs.push_back(t);
  } else {
    for (const auto& a : sp->agents)
      if (a.future) kin_trajs.push_back(*a.future);
    kin_color = "#2e8b57";
    if (kin_trajs.empty()) {
      for (const auto& a : sp->agents) kin_trajs.push_back(a.history);
      kin_color = "#1f5fbf";
      kin_horizon = scene::kHistoryDuration;
    }
  }

  fs::create_directories(out_dir);
  const std::string scene_path = (fs::path(out_dir) / (sp->scene_id + ".svg")).string();
  const std::string kin_path =
      (fs::path(out_dir) / (sp->scene_id + "-kinematics.svg")).string();
  write_text(scene_path, scene_svg(*sp, samples));
  write_text(kin_path, kinematics_svg(kin_trajs, kin_color, kin_horizon, cfg.metrics,
                                      sp->scene_id + " kinematics"));
  std::printf("wrote %s and %s\n", scene_path.c_str(), kin_path.c_str());
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"polynomial-representation diffusion for traffic scene generation"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  auto add_common = [](CLI::App* sub, Common& c, bool seed_required) {
    sub->add_option("--config", c.config, "JSON config file (sections model/train/sample/metrics/datagen)");
    CLI::Option* seed = sub->add_option("--seed", c.seed, "RNG seed");
    if (seed_required) seed->required();
    sub->add_flag("--print-config", c.print_config, "print the resolved config and exit");
  };

  // datagen
  Common dg_com;
  std::string dg_out;
  int dg_scenes = -1;
  CLI::App* dg = app.add_subcommand("datagen", "generate a synthetic scene corpus (JSONL)");
  add_common(dg, dg_com, true);
  dg->add_option("--out", dg_out, "output scenes JSONL")->required();
  dg->add_option("--scenes", dg_scenes, "number of scenes (overrides config)")
      ->check(CLI::PositiveNumber);

  // train
  Common tr_com;
  std::string tr_data, tr_out, tr_rep;
  int tr_epochs = -1;
  CLI::App* tr = app.add_subcommand("train", "train the denoiser on a scene corpus");
  add_common(tr, tr_com, true);
  tr->add_option("--data", tr_data, "training scenes JSONL")->required();
  tr->add_option("--out", tr_out, "output checkpoint path")->required();
  tr->add_option("--epochs", tr_epochs, "training epochs (overrides config)")
      ->check(CLI::PositiveNumber);
  tr->add_option("--representation", tr_rep, "future representation")
      ->check(CLI::IsMember({"polynomial", "sequence"}));

  // sample
  Common sa_com;
  std::string sa_data, sa_params, sa_out;
  int sa_samples = -1, sa_ddim = -1;
  double sa_horizon = 0.0;
  CLI::App* sa = app.add_subcommand("sample", "generate futures for every scene (JSONL)");
  add_common(sa, sa_com, true);
  sa->add_option("--data", sa_data, "scenes JSONL")->required();
  sa->add_option("--params", sa_params, "model checkpoint")->required();
  sa->add_option("--out", sa_out, "output samples JSONL")->required();
  sa->add_option("--samples", sa_samples, "samples per scene (default 32)")
      ->check(CLI::PositiveNumber);
  sa->add_option("--ddim-steps", sa_ddim, "DDIM steps (default 10)")
      ->check(CLI::PositiveNumber);
  sa->add_option("--horizon", sa_horizon, "future horizon in seconds (default 6.0)")
      ->check(CLI::PositiveNumber);

  // eval
  Common ev_com;
  std::string ev_data, ev_out, ev_pred, ev_params;
  bool ev_cv = false;
  int ev_samples = -1, ev_ddim = -1;
  double ev_horizon = 0.0;
  CLI::App* ev = app.add_subcommand("eval", "score generated futures against ground truth");
  add_common(ev, ev_com, false);
  ev->add_option("--data", ev_data, "scenes JSONL with ground-truth futures")->required();
  ev->add_option("--out", ev_out, "output directory (reports.jsonl, summary.csv)")->required();
  ev->add_option("--pred", ev_pred, "generated samples JSONL (from `sample`)");
  ev->add_flag("--cv", ev_cv, "score the constant-velocity baseline");
  ev->add_option("--params", ev_params, "model checkpoint to sample from");
  ev->add_option("--samples", ev_samples, "samples per scene (default 32)")
      ->check(CLI::PositiveNumber);
  ev->add_option("--ddim-steps", ev_ddim, "DDIM steps when sampling (default 10)")
      ->check(CLI::PositiveNumber);
  ev->add_option("--horizon", ev_horizon, "evaluation horizon in seconds")
      ->check(CLI::PositiveNumber);

  // select-hard
  Common sh_com;
  std::string sh_data, sh_out;
  int sh_n = 0;
  CLI::App* sh = app.add_subcommand(
      "select-hard", "pick the scenes where constant velocity scores worst");
  add_common(sh, sh_com, false);
  sh->add_option("--data", sh_data, "scenes JSONL with ground-truth futures")->required();
  sh->add_option("--out", sh_out, "output id list (one per line)")->required();
  sh->add_option("--n", sh_n, "number of scenes to select")
      ->required()
      ->check(CLI::PositiveNumber);

  // bench
  Common be_com;
  std::string be_params, be_out, be_klist = "1,2,5,10,100";
  int be_samples = 6, be_agents = 50, be_map = 150, be_reps = 5;
  CLI::App* be = app.add_subcommand("bench", "inference latency vs DDIM step count");
  add_common(be, be_com, false);
  be->add_option("--params", be_params, "checkpoint (default: randomly initialized)");
  be->add_option("--out", be_out, "output CSV (k,ms)");
  be->add_option("--k-list", be_klist, "comma-separated DDIM step counts");
  be->add_option("--samples", be_samples, "samples per scene (default 6)");
  be->add_option("--agents", be_agents, "agents in the synthesized scene");
  be->add_option("--map-elements", be_map, "map elements in the synthesized scene");
  be->add_option("--reps", be_reps, "timed repetitions per step count (median)");

  // plot
  Common pl_com;
  std::string pl_data, pl_out, pl_scene, pl_pred;
  CLI::App* pl = app.add_subcommand("plot", "render scene and kinematics SVGs");
  add_common(pl, pl_com, false);
  pl->add_option("--data", pl_data, "scenes JSONL")->required();
  pl->add_option("--out", pl_out, "output directory")->required();
  pl->add_option("--scene", pl_scene, "scene id (default: first scene)");
  pl->add_option("--pred", pl_pred, "generated samples JSONL to overlay");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("epdiff");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (app.got_subcommand(dg))
      return cmd_datagen(load_config(dg_com.config), dg_com, dg_out, dg_scenes);
    if (app.got_subcommand(tr))
      return cmd_train(load_config(tr_com.config), tr_com, tr_data, tr_out, tr_epochs,
                       tr_rep);
    if (app.got_subcommand(sa))
      return cmd_sample(load_config(sa_com.config), sa_com, sa_data, sa_params, sa_out,
                        sa_samples, sa_ddim, sa_horizon);
    if (app.got_subcommand(ev))
      return cmd_eval(load_config(ev_com.config), ev_com, ev_data, ev_out, ev_pred,
                      ev_cv, ev_params, ev_samples, ev_ddim, ev_horizon);
    if (app.got_subcommand(sh))
      return cmd_select_hard(load_config(sh_com.config), sh_com, sh_data, sh_out, sh_n);
    if (app.got_subcommand(be))
      return cmd_bench(load_config(be_com.config), be_com, be_params, be_out, be_klist,
                       be_samples, be_agents, be_map, be_reps);
    if (app.got_subcommand(pl))
      return cmd_plot(load_config(pl_com.config), pl_com, pl_data, pl_out, pl_scene,
                      pl_pred);
    return 2;  // unreachable: require_subcommand(1)
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const ModelError& e) {
    std::fprintf(stderr, "model error: %s\n", e.what());
    return 3;
  } catch (const MetricError& e) {
    std::fprintf(stderr, "metric error: %s\n", e.what());
    return 3;
  } catch (const FitError& e) {
    std::fprintf(stderr, "fit error: %s\n", e.what());
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  }
}

}  // namespace epd::cli
