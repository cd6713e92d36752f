#pragma once

#include <Eigen/Core>
#include <vector>

#include "epd/common.hpp"

namespace epd::diffusion {

// Canonical linear schedule endpoints used by training and sampling.
inline constexpr double kBetaStart = 1e-5;
inline constexpr double kBetaEnd = 0.2;

// Variance schedule beta_s, s = 1..S, with cached cumulative products
// alpha_bar(s) = prod_{k<=s} (1 - beta_k) and alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  // beta_s = beta_start + s * (beta_end - beta_start) / S; the endpoint is hit
  // exactly (std::lerp), so beta(S) == beta_end bitwise.
  static NoiseSchedule linear(int steps, double beta_start, double beta_end);
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int s) const;       // s in [1, S]
  double alpha_bar(int s) const;  // s in [0, S]

 private:
  NoiseSchedule() = default;
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;  // S + 1 entries
};

// x_s = sqrt(alpha_bar_s) * x0 + sqrt(1 - alpha_bar_s) * eps, one step index
// per row (agents are diffused independently during training).
Eigen::MatrixXd forward_diffuse(const Eigen::MatrixXd& x0, const std::vector<int>& s,
                                const Eigen::MatrixXd& eps, const NoiseSchedule& sched);

// Deterministic sampling grid: round(S * j / K) for j = K..0; strictly
// decreasing from S to 0. Requires 1 <= K <= S.
std::vector<int> ddim_substeps(int steps, int k);

// Deterministic (eta = 0) update from step s to s_prev < s:
// x0_hat = (x_s - sqrt(1-a_s) eps_hat) / sqrt(a_s);
// x_prev = sqrt(a_prev) x0_hat + sqrt(1-a_prev) eps_hat.
Eigen::MatrixXd ddim_step(const Eigen::MatrixXd& x_s, const Eigen::MatrixXd& eps_hat, int s,
                          int s_prev, const NoiseSchedule& sched);

// Same update with x0_hat clamped to [-clip, clip] before re-noising. Keeps
// the reverse iteration bounded at very low alpha_bar, where the exact
// inversion division amplifies any predictor error; used by the sampler.
Eigen::MatrixXd ddim_step_clamped(const Eigen::MatrixXd& x_s, const Eigen::MatrixXd& eps_hat,
                                  int s, int s_prev, const NoiseSchedule& sched, double clip);

}  // namespace epd::diffusion
