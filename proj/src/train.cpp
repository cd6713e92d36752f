#include "epd/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "epd/diffusion.hpp"
#include "epd/parallel.hpp"

namespace epd::train {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (warmup_epochs < 0) throw ConfigError("train: warmup_epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw ConfigError("train: Adam betas must lie in (0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be positive");
}

double lr_at(const TrainConfig& cfg, double epoch_frac) {
  if (cfg.epochs <= 0) return 0.0;
  const double warmup = std::min<double>(cfg.warmup_epochs, cfg.epochs);
  if (warmup > 0.0 && epoch_frac < warmup) return cfg.lr * (epoch_frac / warmup);
  const double span = cfg.epochs - warmup;
  if (span <= 0.0) return cfg.lr;
  const double x = std::clamp((epoch_frac - warmup) / span, 0.0, 1.0);
  return 0.5 * cfg.lr * (1.0 + std::cos(M_PI * x));
}

net::Standardizer fit_standardizer(const net::Mat& rows) {
  if (rows.rows() == 0) throw DataError("standardizer: no target rows");
  net::Standardizer st;
  st.mean = rows.colwise().mean().transpose();
  const net::Mat centered = rows.rowwise() - st.mean.transpose();
  st.std = (centered.array().square().colwise().mean().sqrt().matrix())
               .transpose()
               .cwiseMax(1e-6);
  return st;
}

namespace {

struct PreparedScene {
  net::ModelInputs inputs;
  net::Mat targets;  // standardized
};

}  // namespace

TrainResult train(net::ModelParams& params, const std::vector<scene::Scene>& scenes,
                  const TrainConfig& cfg) {
  cfg.validate();
  params.config.validate();
  TrainResult result;

  // Collect usable scenes and their raw targets.
  std::vector<PreparedScene> prepared;
  std::vector<net::Mat> raw_targets;
  for (const scene::Scene& s : scenes) {
    const bool complete = !s.agents.empty() &&
                          std::all_of(s.agents.begin(), s.agents.end(),
                                      [](const scene::Agent& a) { return a.future.has_value(); });
    if (!complete) {
      std::cerr << "train: skipping scene '" << s.scene_id
                << "' (no agents or missing futures)\n";
      ++result.scenes_skipped;
      continue;
    }
    PreparedScene p;
    p.inputs = net::build_inputs(s, params.config.representation);
    p.targets = net::training_targets(s, params.config.representation);
    raw_targets.push_back(p.targets);
    prepared.push_back(std::move(p));
  }
  result.scenes_used = static_cast<int>(prepared.size());
  if (prepared.empty()) throw DataError("train: no usable scenes");

  Eigen::Index total_rows = 0;
  for (const auto& t : raw_targets) total_rows += t.rows();
  net::Mat all_rows(total_rows, params.config.future_dim());
  Eigen::Index at = 0;
  for (const auto& t : raw_targets) {
    all_rows.middleRows(at, t.rows()) = t;
    at += t.rows();
  }
  params.standardizer = fit_standardizer(all_rows);
  for (auto& p : prepared) p.targets = params.standardizer.apply(p.targets);

  const auto sched = diffusion::NoiseSchedule::linear(
      params.config.diffusion_steps, diffusion::kBetaStart, diffusion::kBetaEnd);
  const int steps_total = params.config.diffusion_steps;
  const int fdim = params.config.future_dim();

  // AdamW state, aligned with the parameter store.
  auto m = net::GradBuffer::zeros_like(params.store);
  auto v = net::GradBuffer::zeros_like(params.store);
  long adam_t = 0;

  const int n = static_cast<int>(prepared.size());
  const int n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto shuffle_rng = make_rng({cfg.seed, static_cast<std::uint64_t>(epoch), 0xB1});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    double last_lr = 0.0;
    for (int b = 0; b < n_batches; ++b) {
      const int lo = b * cfg.batch_size;
      const int nb = std::min(cfg.batch_size, n - lo);
      std::vector<net::GradBuffer> bufs(nb);
      std::vector<double> losses(nb, 0.0);

      parallel_for(nb, [&](int i) {
        const PreparedScene& ps = prepared[order[lo + i]];
        const Eigen::Index a = ps.targets.rows();
        auto rng = make_rng({cfg.seed, static_cast<std::uint64_t>(epoch),
                             static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(i)});
        std::uniform_int_distribution<int> step_dist(1, steps_total);
        std::vector<int> steps(a);
        for (auto& s : steps) s = step_dist(rng);
        std::normal_distribution<double> normal(0.0, 1.0);
        net::Mat eps(a, fdim);
        for (Eigen::Index r = 0; r < a; ++r)
          for (int c = 0; c < fdim; ++c) eps(r, c) = normal(rng);
        const net::Mat x_s = diffusion::forward_diffuse(ps.targets, steps, eps, sched);

        net::GraphCache cache;
        const net::Mat eps_hat = net::full_forward(ps.inputs, x_s, steps, params,
                                                   /*train=*/true, &rng, &cache);
        losses[i] = net::loss_mse(eps, eps_hat);
        const net::Mat d_hat =
            (2.0 / (static_cast<double>(a) * nb)) * (eps_hat - eps);
        bufs[i] = net::GradBuffer::zeros_like(params.store);
        net::full_backward(d_hat, params, cache, bufs[i]);
      });

      auto grads = net::GradBuffer::zeros_like(params.store);
      for (int i = 0; i < nb; ++i) grads.add(bufs[i]);  // order-fixed reduction
      const double batch_loss =
          std::accumulate(losses.begin(), losses.end(), 0.0) / nb;
      if (!std::isfinite(batch_loss))
        throw ModelError("train: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += std::accumulate(losses.begin(), losses.end(), 0.0);

      ++adam_t;
      const double lr =
          lr_at(cfg, epoch + (b + 0.5) / static_cast<double>(n_batches));
      last_lr = lr;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t));
      for (int h = 0; h < params.store.size(); ++h) {
        const net::Mat& g = grads.g[h];
        m.g[h] = cfg.beta1 * m.g[h] + (1.0 - cfg.beta1) * g;
        v.g[h] = cfg.beta2 * v.g[h] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        net::Mat update =
            ((m.g[h] / bc1).array() / ((v.g[h] / bc2).array().sqrt() + cfg.adam_eps))
                .matrix();
        auto& value = params.store.at(h).value;
        if (params.store.at(h).decay && cfg.weight_decay > 0.0)
          update += cfg.weight_decay * value;
        value -= lr * update;
      }
    }
    result.epochs.push_back({epoch, epoch_loss / n, last_lr});
  }
  return result;
}

}  // namespace epd::train
