#include "epd/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"

using epd::net::ModelConfig;
using epd::net::ModelParams;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.hidden_dim = 8;
  c.n_heads = 2;
  c.n_enc_blocks = 1;
  c.n_denoise_blocks = 1;
  c.dropout = 0.0;
  return c;
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("checkpoint round trip preserves everything") {
  ModelParams p = epd::net::init_params(tiny_config(), 77);
  p.standardizer.mean = Eigen::VectorXd::LinSpaced(12, -1.0, 3.5);
  p.standardizer.std = Eigen::VectorXd::LinSpaced(12, 0.5, 2.0);
  const std::string path = tmp_path("epd_ckpt_roundtrip.bin");
  epd::ckpt::save(path, p);

  const ModelParams q = epd::ckpt::load(path);
  CHECK(q.config.hidden_dim == 8);
  CHECK(q.config.n_heads == 2);
  CHECK(q.config.diffusion_steps == p.config.diffusion_steps);
  CHECK(q.config.representation == p.config.representation);
  CHECK(q.standardizer.mean == p.standardizer.mean);
  CHECK(q.standardizer.std == p.standardizer.std);
  REQUIRE(q.store.size() == p.store.size());
  for (int i = 0; i < p.store.size(); ++i) {
    CHECK(q.store.at(i).name == p.store.at(i).name);
    CHECK(q.store.at(i).value == p.store.at(i).value);  // bitwise
    CHECK(q.store.at(i).decay == p.store.at(i).decay);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint writing is byte-deterministic") {
  const ModelParams p = epd::net::init_params(tiny_config(), 5);
  const std::string a = tmp_path("epd_ckpt_a.bin");
  const std::string b = tmp_path("epd_ckpt_b.bin");
  epd::ckpt::save(a, p);
  epd::ckpt::save(b, p);
  CHECK(slurp(a) == slurp(b));
  std::remove(a.c_str());
  std::remove(b.c_str());
}

TEST_CASE("malformed checkpoints are rejected") {
  const std::string path = tmp_path("epd_ckpt_bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE it is not a checkpoint";
  }
  CHECK_THROWS_AS(epd::ckpt::load(path), epd::DataError);

  // Truncated payload: write a valid file, then chop off the tail.
  const ModelParams p = epd::net::init_params(tiny_config(), 6);
  epd::ckpt::save(path, p);
  const std::string full = slurp(path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(full.data(), static_cast<std::streamsize>(full.size() - 64));
  }
  CHECK_THROWS_WITH_AS(epd::ckpt::load(path), doctest::Contains("truncated"),
                       epd::DataError);

  CHECK_THROWS_AS(epd::ckpt::load(tmp_path("epd_ckpt_missing.bin")), epd::DataError);
  std::remove(path.c_str());
}

TEST_CASE("compatibility check names the first mismatching tensor") {
  const ModelParams p = epd::net::init_params(tiny_config(), 8);
  CHECK_NOTHROW(epd::ckpt::check_compatible(p, tiny_config()));

  // Wider hidden size: the very first tensor already differs.
  ModelConfig wider = tiny_config();
  wider.hidden_dim = 16;
  CHECK_THROWS_WITH_AS(epd::ckpt::check_compatible(p, wider),
                       doctest::Contains("agent_embed.fc1.w"), epd::ModelError);

  // Same widths, different head count: the per-head bias projection differs.
  ModelConfig heads = tiny_config();
  heads.n_heads = 4;
  CHECK_THROWS_WITH_AS(epd::ckpt::check_compatible(p, heads),
                       doctest::Contains("relbias"), epd::ModelError);

  // Extra blocks change the tensor list.
  ModelConfig deeper = tiny_config();
  deeper.n_denoise_blocks = 2;
  CHECK_THROWS_AS(epd::ckpt::check_compatible(p, deeper), epd::ModelError);

  ModelConfig steps = tiny_config();
  steps.diffusion_steps = 500;
  CHECK_THROWS_WITH_AS(epd::ckpt::check_compatible(p, steps),
                       doctest::Contains("diffusion_steps"), epd::ModelError);

  ModelConfig repr = tiny_config();
  repr.representation = epd::net::Representation::sequence;
  CHECK_THROWS_AS(epd::ckpt::check_compatible(p, repr), epd::ModelError);
}
