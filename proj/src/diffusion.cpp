#include "epd/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace epd::diffusion {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("noise schedule: steps must be >= 1");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || !(beta_start <= beta_end))
    throw ConfigError("noise schedule: need 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(steps);
  for (int s = 1; s <= steps; ++s)
    betas[s - 1] = std::lerp(beta_start, beta_end, static_cast<double>(s) / steps);
  return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ConfigError("noise schedule: empty beta list");
  for (double b : betas)
    if (!(b > 0.0) || !(b < 1.0)) throw ConfigError("noise schedule: betas must lie in (0,1)");
  NoiseSchedule sched;
  sched.betas_ = std::move(betas);
  sched.alpha_bar_.resize(sched.betas_.size() + 1);
  sched.alpha_bar_[0] = 1.0;
  for (std::size_t s = 1; s < sched.alpha_bar_.size(); ++s)
    sched.alpha_bar_[s] = sched.alpha_bar_[s - 1] * (1.0 - sched.betas_[s - 1]);
  return sched;
}

double NoiseSchedule::beta(int s) const {
  if (s < 1 || s > steps()) throw std::domain_error("beta: step outside [1, S]");
  return betas_[s - 1];
}

double NoiseSchedule::alpha_bar(int s) const {
  if (s < 0 || s > steps()) throw std::domain_error("alpha_bar: step outside [0, S]");
  return alpha_bar_[s];
}

Eigen::MatrixXd forward_diffuse(const Eigen::MatrixXd& x0, const std::vector<int>& s,
                                const Eigen::MatrixXd& eps, const NoiseSchedule& sched) {
  if (eps.rows() != x0.rows() || eps.cols() != x0.cols())
    throw std::invalid_argument("forward_diffuse: eps shape must match x0");
  if (static_cast<Eigen::Index>(s.size()) != x0.rows())
    throw std::invalid_argument("forward_diffuse: one step index per row required");
  Eigen::MatrixXd out(x0.rows(), x0.cols());
  for (Eigen::Index r = 0; r < x0.rows(); ++r) {
    if (s[r] < 1 || s[r] > sched.steps())
      throw std::domain_error("forward_diffuse: step outside [1, S]");
    const double ab = sched.alpha_bar(s[r]);
    out.row(r) = std::sqrt(ab) * x0.row(r) + std::sqrt(1.0 - ab) * eps.row(r);
  }
  return out;
}

std::vector<int> ddim_substeps(int steps, int k) {
  if (k < 1 || k > steps) throw ConfigError("ddim_substeps: K must lie in [1, S]");
  std::vector<int> out;
  out.reserve(k + 1);
  for (int j = k; j >= 0; --j)
    out.push_back(static_cast<int>(std::lround(static_cast<double>(steps) * j / k)));
  return out;
}

namespace {

Eigen::MatrixXd ddim_step_impl(const Eigen::MatrixXd& x_s, const Eigen::MatrixXd& eps_hat,
                               int s, int s_prev, const NoiseSchedule& sched, double clip) {
  if (s < 1 || s > sched.steps()) throw std::domain_error("ddim_step: s outside [1, S]");
  if (s_prev < 0 || s_prev >= s)
    throw std::domain_error("ddim_step: s_prev must lie in [0, s)");
  if (eps_hat.rows() != x_s.rows() || eps_hat.cols() != x_s.cols())
    throw std::invalid_argument("ddim_step: eps_hat shape must match x_s");
  const double ab = sched.alpha_bar(s);
  const double ab_prev = sched.alpha_bar(s_prev);
  Eigen::MatrixXd x0_hat = (x_s - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
  if (clip > 0.0) x0_hat = x0_hat.cwiseMax(-clip).cwiseMin(clip);
  return std::sqrt(ab_prev) * x0_hat + std::sqrt(1.0 - ab_prev) * eps_hat;
}

}  // namespace

Eigen::MatrixXd ddim_step(const Eigen::MatrixXd& x_s, const Eigen::MatrixXd& eps_hat, int s,
                          int s_prev, const NoiseSchedule& sched) {
  return ddim_step_impl(x_s, eps_hat, s, s_prev, sched, 0.0);
}

Eigen::MatrixXd ddim_step_clamped(const Eigen::MatrixXd& x_s, const Eigen::MatrixXd& eps_hat,
                                  int s, int s_prev, const NoiseSchedule& sched, double clip) {
  if (!(clip > 0.0)) throw std::invalid_argument("ddim_step_clamped: clip must be positive");
  return ddim_step_impl(x_s, eps_hat, s, s_prev, sched, clip);
}

}  // namespace epd::diffusion
