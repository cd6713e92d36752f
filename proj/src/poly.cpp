#include "epd/poly.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace epd::poly {

namespace {

constexpr int kMaxDegree = 15;
constexpr double kDomainSlack = 1e-9;

void check_degree(int degree) {
  if (degree < 1 || degree > kMaxDegree)
    throw std::invalid_argument("polynomial degree must be in [1, " +
                                std::to_string(kMaxDegree) + "], got " +
                                std::to_string(degree));
}

double clamp_unit(double u, const char* what) {
  if (u < -kDomainSlack || u > 1.0 + kDomainSlack)
    throw std::domain_error(std::string(what) + ": parameter outside curve domain");
  return std::clamp(u, 0.0, 1.0);
}

// de Casteljau on a scratch copy of the control points.
Vec2 de_casteljau(std::span<const Vec2> cp, double u) {
  std::array<Vec2, kMaxDegree + 1> w;
  std::copy(cp.begin(), cp.end(), w.begin());
  const int d = static_cast<int>(cp.size()) - 1;
  for (int r = 1; r <= d; ++r)
    for (int i = 0; i <= d - r; ++i) w[i] = w[i] * (1.0 - u) + w[i + 1] * u;
  return w[0];
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r *= static_cast<double>(n - k + i) / i;
  return r;
}

}  // namespace

std::vector<double> bernstein_basis(int degree, double t) {
  if (degree < 0) throw std::invalid_argument("bernstein_basis: negative degree");
  if (t < -kDomainSlack || t > 1.0 + kDomainSlack)
    throw std::domain_error("bernstein_basis: t outside [0,1]");
  t = std::clamp(t, 0.0, 1.0);
  std::vector<double> w(degree + 1, 0.0);
  w[0] = 1.0;
  const double s = 1.0 - t;
  for (int j = 1; j <= degree; ++j) {
    double saved = 0.0;
    for (int k = 0; k < j; ++k) {
      const double tmp = w[k];
      w[k] = saved + s * tmp;
      saved = t * tmp;
    }
    w[j] = saved;
  }
  return w;
}

PolyCurve::PolyCurve(std::vector<Vec2> control_points, double duration)
    : cp_(std::move(control_points)), duration_(duration) {
  check_degree(static_cast<int>(cp_.size()) - 1);
  if (!(duration_ > 0.0) || !std::isfinite(duration_))
    throw std::invalid_argument("PolyCurve: duration must be positive");
  for (const Vec2& p : cp_)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw std::invalid_argument("PolyCurve: non-finite control point");
}

Vec2 PolyCurve::eval(double t) const {
  const double u = clamp_unit(t / duration_, "PolyCurve::eval");
  return de_casteljau(cp_, u);
}

Vec2 PolyCurve::derivative(double t, int order) const {
  if (order < 1) throw std::invalid_argument("PolyCurve::derivative: order must be >= 1");
  const int d = degree();
  if (order > d) return {0.0, 0.0};
  const double u = clamp_unit(t / duration_, "PolyCurve::derivative");
  std::array<Vec2, kMaxDegree + 1> diff;
  std::copy(cp_.begin(), cp_.end(), diff.begin());
  double factor = 1.0;
  for (int k = 0; k < order; ++k) {
    for (int i = 0; i < d - k; ++i) diff[i] = diff[i + 1] - diff[i];
    factor *= static_cast<double>(d - k) / duration_;
  }
  return de_casteljau(std::span<const Vec2>(diff.data(), d - order + 1), u) * factor;
}

PolyCurve PolyCurve::elevated() const {
  const int d = degree();
  std::vector<Vec2> q(d + 2);
  q[0] = cp_[0];
  q[d + 1] = cp_[d];
  for (int i = 1; i <= d; ++i) {
    const double a = static_cast<double>(i) / (d + 1);
    q[i] = cp_[i - 1] * a + cp_[i] * (1.0 - a);
  }
  return PolyCurve(std::move(q), duration_);
}

PolyCurve PolyCurve::transformed(double rotation, Vec2 translation) const {
  std::vector<Vec2> q(cp_.size());
  for (std::size_t i = 0; i < cp_.size(); ++i) q[i] = cp_[i].rotated(rotation) + translation;
  return PolyCurve(std::move(q), duration_);
}

std::vector<double> to_displacements(const PolyCurve& curve) {
  const auto& cp = curve.control_points();
  std::vector<double> d;
  d.reserve(2 * (cp.size() - 1));
  for (std::size_t i = 1; i < cp.size(); ++i) {
    d.push_back(cp[i].x - cp[i - 1].x);
    d.push_back(cp[i].y - cp[i - 1].y);
  }
  return d;
}

PolyCurve from_displacements(int degree, Vec2 start, std::span<const double> disp,
                             double duration) {
  check_degree(degree);
  if (disp.size() != static_cast<std::size_t>(2 * degree))
    throw std::invalid_argument("from_displacements: expected " + std::to_string(2 * degree) +
                                " values, got " + std::to_string(disp.size()));
  std::vector<Vec2> cp(degree + 1);
  cp[0] = start;
  for (int i = 0; i < degree; ++i)
    cp[i + 1] = cp[i] + Vec2{disp[2 * i], disp[2 * i + 1]};
  return PolyCurve(std::move(cp), duration);
}

namespace {

Eigen::MatrixXd design_matrix(std::span<const TimedPoint> samples, int degree,
                              double duration) {
  Eigen::MatrixXd phi(samples.size(), degree + 1);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const double u = clamp_unit(samples[r].t / duration, "fit");
    const auto basis = bernstein_basis(degree, u);
    for (int c = 0; c <= degree; ++c) phi(r, c) = basis[c];
  }
  return phi;
}

PolyCurve curve_from_coeffs(const Eigen::VectorXd& bx, const Eigen::VectorXd& by,
                            double duration) {
  std::vector<Vec2> cp(bx.size());
  for (int i = 0; i < bx.size(); ++i) cp[i] = {bx[i], by[i]};
  return PolyCurve(std::move(cp), duration);
}

}  // namespace

PolyCurve fit_lsq(std::span<const TimedPoint> samples, int degree, double duration) {
  check_degree(degree);
  if (samples.size() < static_cast<std::size_t>(degree + 1))
    throw FitError("fit_lsq: need at least " + std::to_string(degree + 1) + " samples");
  const Eigen::MatrixXd phi = design_matrix(samples, degree, duration);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
  qr.setThreshold(1e-10);
  if (qr.rank() < degree + 1)
    throw FitError("fit_lsq: rank-deficient design (too few distinct sample times)");
  Eigen::VectorXd yx(samples.size()), yy(samples.size());
  for (std::size_t r = 0; r < samples.size(); ++r) {
    yx[r] = samples[r].p.x;
    yy[r] = samples[r].p.y;
  }
  return curve_from_coeffs(qr.solve(yx), qr.solve(yy), duration);
}

PolyCurve fit_bayesian(std::span<const TimedPoint> samples, int degree, double duration,
                       const FitConfig& cfg) {
  check_degree(degree);
  if (samples.empty()) throw FitError("fit_bayesian: no samples");
  if (!(cfg.prior_std > 0.0) || !(cfg.obs_noise_std > 0.0))
    throw std::invalid_argument("fit_bayesian: prior_std and obs_noise_std must be positive");

  // Parameterize as (start point, displacements): eval(u) = p0 + sum_k G_k(u) d_k
  // with G_k(u) = sum_{i>k} B_i(u). The start point gets a broad prior so only
  // the displacement magnitudes are shrunk.
  const int n = static_cast<int>(samples.size());
  Eigen::MatrixXd g(n, degree + 1);
  Eigen::VectorXd yx(n), yy(n);
  for (int r = 0; r < n; ++r) {
    const double u = clamp_unit(samples[r].t / duration, "fit_bayesian");
    const auto basis = bernstein_basis(degree, u);
    g(r, 0) = 1.0;
    double tail = 1.0;
    for (int k = 0; k < degree; ++k) {
      tail -= basis[k];
      g(r, k + 1) = tail;
    }
    yx[r] = samples[r].p.x;
    yy[r] = samples[r].p.y;
  }
  const double obs_prec = 1.0 / (cfg.obs_noise_std * cfg.obs_noise_std);
  constexpr double kStartPriorStd = 1e6;
  Eigen::MatrixXd a = g.transpose() * g * obs_prec;
  a(0, 0) += 1.0 / (kStartPriorStd * kStartPriorStd);
  const double disp_prec = 1.0 / (cfg.prior_std * cfg.prior_std);
  for (int k = 1; k <= degree; ++k) a(k, k) += disp_prec;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::VectorXd wx = ldlt.solve(g.transpose() * yx * obs_prec);
  const Eigen::VectorXd wy = ldlt.solve(g.transpose() * yy * obs_prec);

  std::vector<Vec2> cp(degree + 1);
  cp[0] = {wx[0], wy[0]};
  for (int k = 0; k < degree; ++k) cp[k + 1] = cp[k] + Vec2{wx[k + 1], wy[k + 1]};
  return PolyCurve(std::move(cp), duration);
}

namespace {

// Bernstein -> monomial coefficients (ascending powers of u) for one coordinate.
std::vector<double> to_monomial(std::span<const Vec2> cp, bool ycoord) {
  const int d = static_cast<int>(cp.size()) - 1;
  std::vector<double> a(d + 1, 0.0);
  for (int j = 0; j <= d; ++j)
    for (int i = 0; i <= j; ++i) {
      const double sign = ((j - i) % 2 == 0) ? 1.0 : -1.0;
      const double v = ycoord ? cp[i].y : cp[i].x;
      a[j] += v * binomial(d, i) * binomial(d - i, j - i) * sign;
    }
  return a;
}

std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

// Real roots in [0,1] of a monomial polynomial, via companion-matrix
// eigenvalues plus a couple of Newton polish steps.
std::vector<double> real_roots_unit(std::vector<double> c) {
  double maxc = 0.0;
  for (double v : c) maxc = std::max(maxc, std::abs(v));
  if (maxc == 0.0) return {};
  while (c.size() > 1 && std::abs(c.back()) < 1e-13 * maxc) c.pop_back();
  const int deg = static_cast<int>(c.size()) - 1;
  if (deg < 1) return {};

  std::vector<double> roots;
  if (deg == 1) {
    roots.push_back(-c[0] / c[1]);
  } else {
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -c[i] / c[deg];
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);
    for (int i = 0; i < deg; ++i) {
      const auto ev = es.eigenvalues()[i];
      if (std::abs(ev.imag()) > 1e-7 * (1.0 + std::abs(ev.real()))) continue;
      roots.push_back(ev.real());
    }
  }

  auto eval_poly = [&c](double u, double& f, double& df) {
    f = 0.0;
    df = 0.0;
    for (int i = static_cast<int>(c.size()) - 1; i >= 0; --i) {
      df = df * u + f;
      f = f * u + c[i];
    }
  };
  std::vector<double> in_unit;
  for (double r : roots) {
    if (r < -1e-6 || r > 1.0 + 1e-6) continue;
    for (int it = 0; it < 3; ++it) {
      double f, df;
      eval_poly(r, f, df);
      if (std::abs(df) < 1e-300) break;
      r -= f / df;
    }
    in_unit.push_back(std::clamp(r, 0.0, 1.0));
  }
  return in_unit;
}

}  // namespace

Projection project_point(const PolyCurve& curve, Vec2 p) {
  const auto& cp = curve.control_points();
  // Squared distance D(u) = (x(u)-px)^2 + (y(u)-py)^2; stationary points of D
  // plus both endpoints cover the global minimum.
  std::vector<double> ax = to_monomial(cp, false);
  std::vector<double> ay = to_monomial(cp, true);
  ax[0] -= p.x;
  ay[0] -= p.y;
  std::vector<double> d2 = poly_mul(ax, ax);
  const std::vector<double> yy = poly_mul(ay, ay);
  for (std::size_t i = 0; i < yy.size(); ++i) d2[i] += yy[i];
  std::vector<double> dd(d2.size() - 1);
  for (std::size_t i = 1; i < d2.size(); ++i) dd[i - 1] = d2[i] * static_cast<double>(i);

  std::vector<double> candidates = real_roots_unit(std::move(dd));
  candidates.push_back(0.0);
  candidates.push_back(1.0);

  double best_u = 0.0, best_d2 = std::numeric_limits<double>::infinity();
  for (double u : candidates) {
    const Vec2 diff = de_casteljau(cp, u) - p;
    const double dist2 = diff.squared_norm();
    if (dist2 < best_d2) {
      best_d2 = dist2;
      best_u = u;
    }
  }
  return {best_u * curve.duration(), std::sqrt(best_d2)};
}

namespace {

// Ridge-regularized LSQ used inside the TLS alternation; the tiny ridge keeps
// the refit solvable when foot points cluster.
PolyCurve ridge_fit(const std::vector<double>& u, std::span<const Vec2> pts, int degree) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd phi(n, degree + 1);
  Eigen::VectorXd yx(n), yy(n);
  for (int r = 0; r < n; ++r) {
    const auto basis = bernstein_basis(degree, u[r]);
    for (int c = 0; c <= degree; ++c) phi(r, c) = basis[c];
    yx[r] = pts[r].x;
    yy[r] = pts[r].y;
  }
  Eigen::MatrixXd a = phi.transpose() * phi;
  const double ridge = 1e-12 * std::max(1.0, a.trace());
  for (int i = 0; i <= degree; ++i) a(i, i) += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  return curve_from_coeffs(ldlt.solve(phi.transpose() * yx), ldlt.solve(phi.transpose() * yy),
                           1.0);
}

}  // namespace

TlsFit fit_tls_borges_pastva(std::span<const Vec2> points, int degree, const FitConfig& cfg) {
  check_degree(degree);
  const int n = static_cast<int>(points.size());
  if (n < degree + 1)
    throw FitError("fit_tls_borges_pastva: need at least " + std::to_string(degree + 1) +
                   " points");

  // Chord-length initialization; the first and last parameters stay pinned to
  // 0 and 1, which removes the affine reparameterization gauge.
  std::vector<double> u(n, 0.0);
  double total = 0.0;
  for (int i = 1; i < n; ++i) {
    total += (points[i] - points[i - 1]).norm();
    u[i] = total;
  }
  if (total <= 0.0) {
    // All points coincide: a constant curve fits exactly.
    std::vector<Vec2> cp(degree + 1, points[0]);
    return {PolyCurve(std::move(cp), 1.0), true, 0.0, 0};
  }
  for (double& v : u) v /= total;

  const int ncp = degree + 1;
  const int nu = std::max(0, n - 2);        // free interior parameters
  const int nvar = 2 * ncp + nu;

  auto rms_at = [&](const PolyCurve& c, const std::vector<double>& uu) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += (c.eval(uu[i]) - points[i]).squared_norm();
    return std::sqrt(s / n);
  };

  PolyCurve curve = ridge_fit(u, points, degree);
  double rms = rms_at(curve, u);
  bool converged = false;
  int it = 0;
  // Gauss-Newton on the joint unknowns (control points, interior foot
  // parameters). Squared-distance residuals are zero at the optimum for
  // noise-free data, so the step is effectively a full Newton step there.
  while (it < cfg.tls_max_iter) {
    ++it;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * n, nvar);
    Eigen::VectorXd res(2 * n);
    for (int i = 0; i < n; ++i) {
      const auto basis = bernstein_basis(degree, u[i]);
      for (int c = 0; c < ncp; ++c) {
        jac(2 * i, c) = basis[c];
        jac(2 * i + 1, ncp + c) = basis[c];
      }
      if (i > 0 && i < n - 1) {
        const Vec2 d1 = curve.derivative(u[i]);
        jac(2 * i, 2 * ncp + i - 1) = d1.x;
        jac(2 * i + 1, 2 * ncp + i - 1) = d1.y;
      }
      const Vec2 r = curve.eval(u[i]) - points[i];
      res[2 * i] = r.x;
      res[2 * i + 1] = r.y;
    }
    Eigen::MatrixXd jtj = jac.transpose() * jac;
    const double damp = 1e-12 * std::max(1.0, jtj.trace());
    for (int i = 0; i < nvar; ++i) jtj(i, i) += damp;
    const Eigen::VectorXd step = Eigen::LDLT<Eigen::MatrixXd>(jtj).solve(-jac.transpose() * res);

    // Backtracking keeps the iteration monotone on noisy data.
    double scale = 1.0;
    PolyCurve next = curve;
    std::vector<double> next_u = u;
    double next_rms = rms;
    for (int bt = 0; bt < 8; ++bt) {
      std::vector<Vec2> cp(ncp);
      for (int c = 0; c < ncp; ++c)
        cp[c] = curve.control_points()[c] + Vec2{step[c], step[ncp + c]} * scale;
      std::vector<double> cand_u = u;
      for (int i = 1; i < n - 1; ++i)
        cand_u[i] = std::clamp(u[i] + scale * step[2 * ncp + i - 1], 0.0, 1.0);
      PolyCurve cand(std::move(cp), 1.0);
      const double cand_rms = rms_at(cand, cand_u);
      if (cand_rms <= rms || bt == 7) {
        next = std::move(cand);
        next_u = std::move(cand_u);
        next_rms = cand_rms;
        break;
      }
      scale *= 0.5;
    }
    curve = std::move(next);
    u = std::move(next_u);
    const double improvement = rms - next_rms;
    rms = next_rms;
    if (std::abs(improvement) < cfg.tls_tol) {
      converged = true;
      break;
    }
  }
  return {curve, converged, rms, it};
}

}  // namespace epd::poly
