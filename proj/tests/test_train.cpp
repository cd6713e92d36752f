#include "epd/train.hpp"

#include <cmath>

#include "doctest.h"
#include "epd/parallel.hpp"
#include "epd/poly.hpp"

using epd::Vec2;
using epd::net::Mat;
using epd::net::ModelConfig;
using epd::net::ModelParams;
using epd::train::TrainConfig;

namespace {

epd::scene::Scene make_scene(int n_agents, int n_map, std::uint64_t seed) {
  auto rng = epd::make_rng({seed, 0x5CE});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  epd::scene::Scene s;
  s.scene_id = "train-" + std::to_string(seed);
  for (int i = 0; i < n_agents; ++i) {
    const Vec2 base{12.0 * i + 3.0 * u(rng), 8.0 * u(rng)};
    const Vec2 vel{3.0 + u(rng), 0.6 * u(rng)};
    std::vector<Vec2> h(6);
    for (int k = 0; k < 6; ++k)
      h[k] = base + static_cast<double>(k) * vel + Vec2{0.25 * u(rng), 0.25 * u(rng)};
    epd::scene::Agent a{.id = "a" + std::to_string(i),
                        .history = epd::poly::PolyCurve(h, epd::scene::kHistoryDuration)};
    std::vector<Vec2> f(7);
    f[0] = a.history.eval(epd::scene::kHistoryDuration);
    for (int k = 1; k < 7; ++k)
      f[k] = f[k - 1] + vel + Vec2{0.3 * u(rng), 0.3 * u(rng)};
    a.future = epd::poly::PolyCurve(f, s.horizon_s);
    s.agents.push_back(std::move(a));
  }
  for (int m = 0; m < n_map; ++m) {
    std::vector<Vec2> g(4);
    const Vec2 start{15.0 * u(rng), 20.0 + 6.0 * m};
    const Vec2 dir{5.0 + u(rng), u(rng)};
    for (int k = 0; k < 4; ++k)
      g[k] = start + static_cast<double>(k) * dir + Vec2{0.4 * u(rng), 0.4 * u(rng)};
    s.map.push_back({.id = "m" + std::to_string(m),
                     .category = epd::scene::MapCategory::lane_center,
                     .geometry = epd::poly::PolyCurve(g, 1.0)});
  }
  epd::scene::validate(s);
  return s;
}

std::vector<epd::scene::Scene> make_corpus(int n, std::uint64_t seed) {
  std::vector<epd::scene::Scene> out;
  for (int i = 0; i < n; ++i) out.push_back(make_scene(2 + i % 2, 1 + i % 2, seed + i));
  return out;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.hidden_dim = 8;
  c.n_heads = 2;
  c.n_enc_blocks = 1;
  c.n_denoise_blocks = 1;
  c.dropout = 0.1;
  return c;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  if (a.store.size() != b.store.size()) return false;
  for (int i = 0; i < a.store.size(); ++i)
    if (a.store.at(i).value != b.store.at(i).value) return false;
  return true;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  c.lr = 1.0;
  c.epochs = 64;
  c.warmup_epochs = 10;
  CHECK(epd::train::lr_at(c, 0.0) == doctest::Approx(0.0));
  CHECK(epd::train::lr_at(c, 5.0) == doctest::Approx(0.5));
  CHECK(epd::train::lr_at(c, 10.0) == doctest::Approx(1.0));
  CHECK(epd::train::lr_at(c, 37.0) == doctest::Approx(0.5));  // cosine midpoint
  CHECK(epd::train::lr_at(c, 64.0) == doctest::Approx(0.0));

  // Non-increasing after warmup.
  double prev = epd::train::lr_at(c, 10.0);
  for (double f = 10.5; f <= 64.0; f += 0.5) {
    const double cur = epd::train::lr_at(c, f);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }

  c.warmup_epochs = 0;
  CHECK(epd::train::lr_at(c, 0.0) == doctest::Approx(1.0));
  c.epochs = 0;
  CHECK(epd::train::lr_at(c, 0.0) == 0.0);
}

TEST_CASE("standardizer fit") {
  Mat rows(2, 2);
  rows << 1.0, 10.0, 3.0, 30.0;
  const auto st = epd::train::fit_standardizer(rows);
  CHECK(st.mean(0) == doctest::Approx(2.0));
  CHECK(st.mean(1) == doctest::Approx(20.0));
  CHECK(st.std(0) == doctest::Approx(1.0));
  CHECK(st.std(1) == doctest::Approx(10.0));

  Mat constant = Mat::Ones(5, 3);
  const auto st2 = epd::train::fit_standardizer(constant);
  CHECK(st2.std.minCoeff() == doctest::Approx(1e-6));  // clamped
  const Mat z = st2.apply(constant);
  CHECK(z.allFinite());

  CHECK_THROWS_AS(epd::train::fit_standardizer(Mat(0, 3)), epd::DataError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  TrainConfig bad = c;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), epd::ConfigError);
  bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), epd::ConfigError);
  bad = c;
  bad.beta2 = 1.0;
  CHECK_THROWS_AS(bad.validate(), epd::ConfigError);
  bad = c;
  bad.epochs = -1;
  CHECK_THROWS_AS(bad.validate(), epd::ConfigError);
}

TEST_CASE("training reduces the noise-prediction loss") {
  const auto corpus = make_corpus(12, 100);
  ModelParams params = epd::net::init_params(tiny_config(), 1);
  TrainConfig cfg;
  cfg.lr = 5e-3;
  cfg.epochs = 10;
  cfg.warmup_epochs = 1;
  cfg.batch_size = 4;
  cfg.seed = 7;
  const auto result = epd::train::train(params, corpus, cfg);
  REQUIRE(result.epochs.size() == 10);
  CHECK(result.scenes_used == 12);
  CHECK(result.scenes_skipped == 0);
  for (const auto& e : result.epochs) CHECK(std::isfinite(e.mean_loss));
  CHECK(result.epochs.back().mean_loss < result.epochs.front().mean_loss);

  // The standardizer was fitted on the corpus, not left at identity.
  CHECK(params.standardizer.mean.cwiseAbs().maxCoeff() > 0.0);
  CHECK(params.standardizer.std.minCoeff() > 1e-6);
}

TEST_CASE("training is deterministic and mode-independent") {
  const auto corpus = make_corpus(6, 200);
  TrainConfig cfg;
  cfg.lr = 2e-3;
  cfg.epochs = 3;
  cfg.warmup_epochs = 1;
  cfg.batch_size = 4;
  cfg.seed = 11;

  ModelParams a = epd::net::init_params(tiny_config(), 2);
  ModelParams b = epd::net::init_params(tiny_config(), 2);
  const auto ra = epd::train::train(a, corpus, cfg);
  const auto rb = epd::train::train(b, corpus, cfg);
  CHECK(params_equal(a, b));
  for (std::size_t i = 0; i < ra.epochs.size(); ++i)
    CHECK(ra.epochs[i].mean_loss == rb.epochs[i].mean_loss);

  // The serial reference path produces bit-identical results.
  ModelParams c = epd::net::init_params(tiny_config(), 2);
  epd::set_parallel_enabled(false);
  const auto rc = epd::train::train(c, corpus, cfg);
  epd::set_parallel_enabled(true);
  CHECK(params_equal(a, c));
  for (std::size_t i = 0; i < ra.epochs.size(); ++i)
    CHECK(ra.epochs[i].mean_loss == rc.epochs[i].mean_loss);
}

TEST_CASE("zero-epoch training only fits the standardizer") {
  const auto corpus = make_corpus(3, 300);
  ModelParams params = epd::net::init_params(tiny_config(), 3);
  const ModelParams before = params;
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto result = epd::train::train(params, corpus, cfg);
  CHECK(result.epochs.empty());
  CHECK(params_equal(params, before));
  CHECK(params.standardizer.mean != before.standardizer.mean);
}

TEST_CASE("scenes without futures are skipped") {
  auto corpus = make_corpus(4, 400);
  corpus[1].agents[0].future.reset();
  ModelParams params = epd::net::init_params(tiny_config(), 4);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 2;
  const auto result = epd::train::train(params, corpus, cfg);
  CHECK(result.scenes_used == 3);
  CHECK(result.scenes_skipped == 1);

  // A corpus with nothing usable is an error.
  for (auto& s : corpus)
    for (auto& a : s.agents) a.future.reset();
  ModelParams p2 = epd::net::init_params(tiny_config(), 4);
  CHECK_THROWS_AS(epd::train::train(p2, corpus, cfg), epd::DataError);
}

TEST_CASE("sequence-representation training runs") {
  auto cfg_model = tiny_config();
  cfg_model.representation = epd::net::Representation::sequence;
  ModelParams params = epd::net::init_params(cfg_model, 5);
  const auto corpus = make_corpus(4, 500);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.lr = 1e-3;
  const auto result = epd::train::train(params, corpus, cfg);
  CHECK(result.epochs.size() == 2);
  for (const auto& e : result.epochs) CHECK(std::isfinite(e.mean_loss));
  CHECK(params.standardizer.mean.size() == 120);
}
