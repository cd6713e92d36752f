#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "epd/diffusion.hpp"
#include "epd/net.hpp"
#include "epd/scene.hpp"

namespace epd::sampler {

struct SampleConfig {
  int ddim_steps = 10;
  int n_samples = 32;
  std::uint64_t seed = 0;
  double x0_clip = 20.0;  // bound on the standardized clean-state estimate

  void validate(int diffusion_steps) const;  // throws ConfigError
};

// Denoiser hook: maps (noisy states, per-agent step indices) to predicted
// noise. Lets tests drive the reverse process with an oracle denoiser.
using DenoiserFn =
    std::function<net::Mat(const net::Mat& delta_s, const std::vector<int>& steps)>;

// One deterministic DDIM trajectory from pure noise down to step 0 on the
// substep grid; rng supplies only the initial Gaussian draw.
net::Mat ddim_generate_one(const DenoiserFn& fn, int n_agents, int dim,
                           const diffusion::NoiseSchedule& sched, int ddim_steps,
                           double x0_clip, std::mt19937_64& rng);

// trajs[sample][agent]; each sample is a full joint scene future, already
// passed through the stationary correction.
struct SceneSamples {
  std::vector<std::vector<scene::FutureTraj>> trajs;
};

// Encodes the scene once, then draws cfg.n_samples independent joint futures
// (sample i uses its own RNG stream, so results are independent of thread
// count and sample order).
SceneSamples generate(const scene::Scene& s, const net::ModelParams& params,
                      const SampleConfig& cfg);

}  // namespace epd::sampler
