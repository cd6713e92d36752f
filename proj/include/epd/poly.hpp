#pragma once

#include <span>
#include <vector>

#include "epd/common.hpp"

namespace epd::poly {

// Bernstein basis row at parameter t in [0,1], computed with the numerically
// stable de Casteljau recurrence. Throws std::domain_error outside [0,1].
std::vector<double> bernstein_basis(int degree, double t);

// A 2D Bernstein-basis polynomial curve over physical time [0, duration].
class PolyCurve {
 public:
  PolyCurve(std::vector<Vec2> control_points, double duration);

  int degree() const { return static_cast<int>(cp_.size()) - 1; }
  double duration() const { return duration_; }
  const std::vector<Vec2>& control_points() const { return cp_; }

  Vec2 eval(double t) const;
  // Analytic k-th derivative with respect to physical time; zero when the
  // order exceeds the degree.
  Vec2 derivative(double t, int order = 1) const;

  // Same curve expressed with degree + 1.
  PolyCurve elevated() const;
  // Rigid motion applied to the whole curve (rotate then translate).
  PolyCurve transformed(double rotation, Vec2 translation) const;

 private:
  std::vector<Vec2> cp_;
  double duration_;
};

// Consecutive control-point differences, interleaved [dx1, dy1, ..., dxd, dyd].
std::vector<double> to_displacements(const PolyCurve& curve);
PolyCurve from_displacements(int degree, Vec2 start, std::span<const double> disp,
                             double duration);

struct TimedPoint {
  double t{0.0};
  Vec2 p{};
};

struct FitConfig {
  double prior_std = 10.0;       // zero-mean Gaussian prior on displacements
  double obs_noise_std = 0.15;   // isotropic observation noise
  int tls_max_iter = 30;
  double tls_tol = 1e-9;
};

// Ordinary least squares on fixed sample times. Throws FitError when the
// design is rank deficient (too few distinct times).
PolyCurve fit_lsq(std::span<const TimedPoint> samples, int degree, double duration);

// Posterior-mean fit under a Gaussian prior on the displacement vector and a
// broad prior on the start point; recovers fit_lsq as prior_std -> infinity.
PolyCurve fit_bayesian(std::span<const TimedPoint> samples, int degree, double duration,
                       const FitConfig& cfg = {});

struct TlsFit {
  PolyCurve curve;
  bool converged{false};
  double rms_residual{0.0};
  int iterations{0};
};

// Total-least-squares fit for unordered geometry (no timestamps): joint
// Gauss-Newton over control points and interior foot parameters with
// Levenberg damping, chord-length init. The curve lives on [0,1].
TlsFit fit_tls_borges_pastva(std::span<const Vec2> points, int degree,
                             const FitConfig& cfg = {});

struct Projection {
  double t{0.0};        // parameter of the closest point, in [0, duration]
  double distance{0.0};
};

// Global closest-point projection via the real roots of the derivative of the
// squared-distance polynomial, compared against both endpoints.
Projection project_point(const PolyCurve& curve, Vec2 p);

}  // namespace epd::poly
