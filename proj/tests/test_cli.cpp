#include "epd/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "epd/scene.hpp"
#include "json.hpp"

using namespace epd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Fresh working directory per test file run; everything lands under it.
const std::string kDir = [] {
  const fs::path dir = fs::temp_directory_path() / "epd_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}();

std::string at(const std::string& name) { return (fs::path(kDir) / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// Captures std::cout/std::cerr (CLI11 help and --print-config go there).
struct Capture {
  std::ostringstream out, err;
  std::streambuf* old_out;
  std::streambuf* old_err;
  Capture() : old_out(std::cout.rdbuf(out.rdbuf())), old_err(std::cerr.rdbuf(err.rdbuf())) {}
  ~Capture() {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
  }
};

int quiet_run(const std::vector<std::string>& args) {
  Capture cap;
  return cli::run(args);
}

const char* kTinyConfig = R"({
  "model": {"hidden_dim": 16, "n_enc_blocks": 1, "n_denoise_blocks": 1,
            "n_heads": 2, "diffusion_steps": 50},
  "train": {"epochs": 1, "warmup_epochs": 1, "batch_size": 4},
  "sample": {"ddim_steps": 3, "n_samples": 4}
})";

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("datagen writes a deterministic, loadable corpus") {
  CHECK(cli::run({"datagen", "--seed", "3", "--scenes", "6", "--out", at("a.jsonl")}) == 0);
  CHECK(cli::run({"datagen", "--seed", "3", "--scenes", "6", "--out", at("b.jsonl")}) == 0);
  CHECK(slurp(at("a.jsonl")) == slurp(at("b.jsonl")));
  const auto scenes = scene::read_scenes(at("a.jsonl"));
  CHECK(scenes.size() == 6);
  for (const auto& s : scenes)
    for (const auto& a : s.agents) CHECK(a.future.has_value());
}

TEST_CASE("usage and config errors exit 2") {
  CHECK(quiet_run({"datagen", "--seed", "1", "--out", at("x.jsonl"), "--bogus"}) == 2);
  CHECK(quiet_run({"frobnicate"}) == 2);
  CHECK(quiet_run({}) == 2);
  CHECK(quiet_run({"datagen", "--out", at("x.jsonl")}) == 2);  // --seed required
  CHECK(quiet_run({"--help"}) == 0);

  write_file(at("bad_key.json"), R"({"model": {"hidden_dimz": 8}})");
  CHECK(quiet_run({"train", "--seed", "1", "--config", at("bad_key.json"), "--data",
                   at("a.jsonl"), "--out", at("m.ckpt")}) == 2);
  write_file(at("bad_sec.json"), R"({"modle": {}})");
  CHECK(quiet_run({"datagen", "--seed", "1", "--config", at("bad_sec.json"), "--out",
                   at("x.jsonl")}) == 2);
  write_file(at("bad_json.json"), "{nope");
  CHECK(quiet_run({"datagen", "--seed", "1", "--config", at("bad_json.json"), "--out",
                   at("x.jsonl")}) == 2);

  // eval needs exactly one sample source.
  CHECK(quiet_run({"eval", "--data", at("a.jsonl"), "--out", at("e")}) == 2);
  CHECK(quiet_run({"eval", "--data", at("a.jsonl"), "--out", at("e"), "--cv", "--pred",
                   at("p.jsonl")}) == 2);
  CHECK(quiet_run({"select-hard", "--data", at("a.jsonl"), "--out", at("h.txt"), "--n",
                   "0"}) == 2);
  CHECK(quiet_run({"bench", "--k-list", "1,zap"}) == 2);
  CHECK(quiet_run({"datagen", "--seed", "1", "--scenes", "-4", "--out", at("x.jsonl")}) == 2);
}

TEST_CASE("missing or malformed inputs exit 3") {
  CHECK(quiet_run({"eval", "--data", at("nope.jsonl"), "--out", at("e"), "--cv"}) == 3);
  CHECK(quiet_run({"sample", "--seed", "1", "--data", at("a.jsonl"), "--params",
                   at("nope.ckpt"), "--out", at("p.jsonl")}) == 3);
  CHECK(quiet_run({"plot", "--data", at("a.jsonl"), "--scene", "no-such-scene", "--out",
                   at("plots")}) == 3);
  write_file(at("garbage.jsonl"), "{\"scene_id\": 42}\n");
  CHECK(quiet_run({"eval", "--data", at("garbage.jsonl"), "--out", at("e"), "--cv"}) == 3);
}

TEST_CASE("train, sample, eval, select-hard, and plot run end to end") {
  write_file(at("tiny.json"), kTinyConfig);
  CHECK(cli::run({"datagen", "--seed", "11", "--scenes", "10", "--out", at("c.jsonl")}) == 0);

  CHECK(cli::run({"train", "--seed", "1", "--config", at("tiny.json"), "--data",
                  at("c.jsonl"), "--out", at("m.ckpt")}) == 0);
  CHECK(fs::exists(at("m.ckpt")));

  // Byte-identical resampling with a fixed seed.
  const std::vector<std::string> sample_args = {
      "sample", "--seed", "7",       "--config", at("tiny.json"), "--data", at("c.jsonl"),
      "--params", at("m.ckpt"), "--out"};
  auto with_out = [&](const std::string& out) {
    auto args = sample_args;
    args.push_back(out);
    return args;
  };
  CHECK(cli::run(with_out(at("p1.jsonl"))) == 0);
  CHECK(cli::run(with_out(at("p2.jsonl"))) == 0);
  const std::string pred_bytes = slurp(at("p1.jsonl"));
  CHECK(pred_bytes == slurp(at("p2.jsonl")));
  CHECK(count_lines(pred_bytes) == 10);

  // The samples file follows the documented schema.
  {
    std::istringstream in(pred_bytes);
    std::string line;
    REQUIRE(std::getline(in, line));
    const json j = json::parse(line);
    CHECK(j.at("scene_id").is_string());
    CHECK(j.at("horizon_s").get<double>() == doctest::Approx(6.0));
    REQUIRE(j.at("samples").is_array());
    CHECK(j.at("samples").size() == 4);
    const json& first = j.at("samples").at(0);
    const auto scenes = scene::read_scenes(at("c.jsonl"));
    REQUIRE(first.size() == scenes.at(0).agents.size());
    CHECK(first.at(0).at("agent_id").get<std::string>() == scenes.at(0).agents.at(0).id);
    CHECK(first.at(0).at("future_cp").size() == scene::kFutureDegree + 1);
  }

  CHECK(cli::run({"eval", "--data", at("c.jsonl"), "--out", at("eval_pred"), "--pred",
                  at("p1.jsonl")}) == 0);
  const std::string reports = slurp(at("eval_pred/reports.jsonl"));
  CHECK(count_lines(reports) == 10);
  const std::string csv = slurp(at("eval_pred/summary.csv"));
  CHECK(csv.rfind("metric,mean,std,n\n", 0) == 0);
  {
    std::istringstream in(reports);
    std::string line;
    REQUIRE(std::getline(in, line));
    const json j = json::parse(line);
    CHECK(j.at("realism_meta").get<double>() >= 0.0);
    CHECK(j.at("realism_meta").get<double>() <= 1.0);
    CHECK(j.at("minade_m").get<double>() >= 0.0);
  }

  // Constant-velocity evaluation emits one report per scene.
  CHECK(cli::run({"eval", "--data", at("c.jsonl"), "--out", at("eval_cv"), "--cv",
                  "--samples", "8"}) == 0);
  CHECK(count_lines(slurp(at("eval_cv/reports.jsonl"))) == 10);

  CHECK(cli::run({"select-hard", "--data", at("c.jsonl"), "--out", at("hard.txt"), "--n",
                  "2"}) == 0);
  CHECK(count_lines(slurp(at("hard.txt"))) == 2);

  CHECK(cli::run({"plot", "--data", at("c.jsonl"), "--out", at("plots"), "--pred",
                  at("p1.jsonl")}) == 0);
  const auto scenes = scene::read_scenes(at("c.jsonl"));
  const std::string id = scenes.front().scene_id;
  const std::string scene_svg = slurp(at("plots/" + id + ".svg"));
  const std::string kin_svg = slurp(at("plots/" + id + "-kinematics.svg"));
  CHECK(scene_svg.find("<svg") != std::string::npos);
  CHECK(scene_svg.find("polyline") != std::string::npos);
  CHECK(kin_svg.find("<svg") != std::string::npos);

  // Inputs are left untouched by the whole pipeline.
  CHECK(slurp(at("c.jsonl")) == slurp(at("c.jsonl")));
}

TEST_CASE("plot on a scene without futures still renders map and history") {
  REQUIRE(cli::run({"datagen", "--seed", "4", "--scenes", "3", "--out",
                    at("plotsrc.jsonl")}) == 0);
  auto scenes = scene::read_scenes(at("plotsrc.jsonl"));
  for (auto& s : scenes)
    for (auto& a : s.agents) a.future.reset();
  scene::write_scenes(scenes, at("nofut.jsonl"));
  CHECK(cli::run({"plot", "--data", at("nofut.jsonl"), "--out", at("plots_nf")}) == 0);
  const std::string svg = slurp(at("plots_nf/" + scenes.front().scene_id + ".svg"));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(fs::exists(at("plots_nf/" + scenes.front().scene_id + "-kinematics.svg")));
}

TEST_CASE("print-config emits resolved JSON without writing artifacts") {
  int rc = -1;
  std::string printed;
  {
    Capture cap;
    rc = cli::run({"datagen", "--seed", "5", "--scenes", "3", "--config", at("tiny.json"),
                   "--out", at("never.jsonl"), "--print-config"});
    printed = cap.out.str();
  }
  CHECK(rc == 0);
  CHECK(!fs::exists(at("never.jsonl")));
  const json j = json::parse(printed);
  CHECK(j.at("subcommand").get<std::string>() == "datagen");
  CHECK(j.at("seed").get<int>() == 5);
  CHECK(j.at("datagen").at("n_scenes").get<int>() == 3);  // flag overrides config

  // Flag overrides show up in the resolved sample config too.
  {
    Capture cap;
    rc = cli::run({"sample", "--seed", "1", "--data", at("c.jsonl"), "--params",
                   at("m.ckpt"), "--out", at("never2.jsonl"), "--samples", "5",
                   "--print-config"});
    printed = cap.out.str();
  }
  CHECK(rc == 0);
  CHECK(!fs::exists(at("never2.jsonl")));
  CHECK(json::parse(printed).at("sample").at("n_samples").get<int>() == 5);
}

TEST_CASE("bench emits one CSV row per requested step count") {
  write_file(at("tiny.json"), kTinyConfig);
  CHECK(cli::run({"bench", "--config", at("tiny.json"), "--k-list", "1,2", "--samples",
                  "1", "--agents", "3", "--map-elements", "4", "--reps", "1", "--out",
                  at("bench.csv")}) == 0);
  const std::string csv = slurp(at("bench.csv"));
  REQUIRE(csv.rfind("k,ms\n", 0) == 0);
  CHECK(count_lines(csv) == 3);
  std::istringstream in(csv);
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  CHECK(row1.rfind("1,", 0) == 0);
  CHECK(row2.rfind("2,", 0) == 0);
  CHECK(std::stod(row1.substr(2)) > 0.0);
}

TEST_CASE("refuses to overwrite an input file") {
  REQUIRE(cli::run({"datagen", "--seed", "8", "--scenes", "2", "--out",
                    at("guard.jsonl")}) == 0);
  const std::string before = slurp(at("guard.jsonl"));
  CHECK(quiet_run({"select-hard", "--data", at("guard.jsonl"), "--out", at("guard.jsonl"),
                   "--n", "1"}) == 2);
  CHECK(slurp(at("guard.jsonl")) == before);
}
