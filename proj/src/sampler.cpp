#include "epd/sampler.hpp"

#include "epd/parallel.hpp"
#include "epd/poly.hpp"

namespace epd::sampler {

void SampleConfig::validate(int diffusion_steps) const {
  if (ddim_steps < 1 || ddim_steps > diffusion_steps)
    throw ConfigError("sample: ddim_steps must lie in [1, diffusion_steps]");
  if (n_samples < 1) throw ConfigError("sample: n_samples must be >= 1");
  if (!(x0_clip > 0.0)) throw ConfigError("sample: x0_clip must be positive");
}

net::Mat ddim_generate_one(const DenoiserFn& fn, int n_agents, int dim,
                           const diffusion::NoiseSchedule& sched, int ddim_steps,
                           double x0_clip, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  net::Mat x(n_agents, dim);
  for (int i = 0; i < n_agents; ++i)
    for (int j = 0; j < dim; ++j) x(i, j) = normal(rng);

  const std::vector<int> grid = diffusion::ddim_substeps(sched.steps(), ddim_steps);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const int s = grid[k], s_prev = grid[k + 1];
    const std::vector<int> steps(n_agents, s);
    const net::Mat eps_hat = fn(x, steps);
    x = diffusion::ddim_step_clamped(x, eps_hat, s, s_prev, sched, x0_clip);
  }
  return x;
}

SceneSamples generate(const scene::Scene& s, const net::ModelParams& params,
                      const SampleConfig& cfg) {
  params.config.validate();
  cfg.validate(params.config.diffusion_steps);
  const auto cond = net::encode_scene(s, params);
  const auto sched = diffusion::NoiseSchedule::linear(
      params.config.diffusion_steps, diffusion::kBetaStart, diffusion::kBetaEnd);
  const int a = static_cast<int>(s.agents.size());
  const int fdim = params.config.future_dim();
  const DenoiserFn fn = [&](const net::Mat& delta_s, const std::vector<int>& steps) {
    return net::denoise_predict(delta_s, steps, cond, params);
  };

  SceneSamples out;
  out.trajs.resize(cfg.n_samples);
  parallel_for(cfg.n_samples, [&](int i) {
    auto rng = make_rng({cfg.seed, static_cast<std::uint64_t>(i), 0xD1F});
    const net::Mat delta =
        ddim_generate_one(fn, a, fdim, sched, cfg.ddim_steps, cfg.x0_clip, rng);
    const net::Mat raw = params.standardizer.invert(delta);

    std::vector<scene::FutureTraj> trajs;
    trajs.reserve(a);
    for (int r = 0; r < a; ++r) {
      const Pose frame = cond.agent_frames[r];
      if (params.config.representation == net::Representation::polynomial) {
        std::vector<double> disp(raw.cols());
        for (Eigen::Index c = 0; c < raw.cols(); ++c) disp[c] = raw(r, c);
        const auto local = poly::from_displacements(scene::kFutureDegree, Vec2{0.0, 0.0},
                                                    disp, s.horizon_s);
        trajs.emplace_back(scene::from_frame(local, frame));
      } else {
        trajs.emplace_back(
            net::sequence_to_points(raw.row(r), frame, s.horizon_s / 60.0));
      }
    }
    out.trajs[i] = scene::stationary_correction(s, std::move(trajs));
  });
  return out;
}

}  // namespace epd::sampler
