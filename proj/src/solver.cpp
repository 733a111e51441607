#include "dks/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "dks/quadrature.hpp"
#include "dks/rng.hpp"

namespace dks {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> shifted_kinks(const ActivationSpec& spec, double alpha, double beta) {
  std::vector<double> out;
  for (double k : spec.kinks) out.push_back((k - beta) / alpha);
  return out;
}

struct Moments {
  Eliminated e;
  double cross = 0.0;  // E[(phi + delta) phi' x]
  double grad2 = 0.0;  // E[phi'^2]
};

Moments moments(const ActivationSpec& spec, double alpha, double beta) {
  if (!(alpha != 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw DomainError("alpha must be non-zero and finite, beta finite");
  const auto& rule = default_rule();
  const auto breaks = shifted_kinks(spec, alpha, beta);
  Moments m;
  const double mean = gauss_expect([&](double x) { return spec.phi(alpha * x + beta); }, rule, breaks);
  const double var = gauss_expect(
      [&](double x) {
        const double v = spec.phi(alpha * x + beta) - mean;
        return v * v;
      },
      rule, breaks);
  const double scale = gauss_expect(
      [&](double x) {
        const double v = spec.phi(alpha * x + beta);
        return v * v;
      },
      rule, breaks);
  if (!(var > 1e-14 * std::max(scale, 1e-300))) {
    std::ostringstream msg;
    msg << "phi(alpha x + beta) has (numerically) zero variance for alpha=" << alpha
        << ", beta=" << beta;
    throw DegenerateActivationError(msg.str());
  }
  m.e.delta = -mean;
  m.e.gamma = 1.0 / std::sqrt(var);
  m.cross = gauss_expect(
      [&](double x) {
        const double u = alpha * x + beta;
        return (spec.phi(u) - mean) * spec.dphi(u) * x;
      },
      rule, breaks);
  m.grad2 = gauss_expect(
      [&](double x) {
        const double d = spec.dphi(alpha * x + beta);
        return d * d;
      },
      rule, breaks);
  return m;
}

Residuals residuals_from(const Moments& m, double alpha, double psi, double target) {
  const double g2 = m.e.gamma * m.e.gamma;
  return {alpha * g2 * m.cross - target, alpha * alpha * g2 * m.grad2 - psi};
}

using Vec2 = Eigen::Vector2d;

// Residual vector, or +inf entries where the point is not admissible.
struct System {
  const ActivationSpec& spec;
  double psi;
  double target;
  bool homogeneous;

  Vec2 operator()(const Vec2& x) const {
    try {
      const double alpha = homogeneous ? 1.0 : x[0];
      const Residuals r = residuals_from(moments(spec, alpha, x[1]), alpha, psi, target);
      Vec2 out(homogeneous ? 0.0 : r.q_slope, r.c_slope);
      if (!out.allFinite()) return Vec2(kInf, kInf);
      return out;
    } catch (const Error&) {
      return Vec2(kInf, kInf);
    }
  }
};

double norm_inf(const Vec2& v) { return v.cwiseAbs().maxCoeff(); }

// Damped Newton with a forward-difference Jacobian, falling back to
// Levenberg-Marquardt steps when the Newton direction does not decrease the
// residual norm.
SolveAttempt newton(const System& f, Vec2 x, const SolveOptions& opts) {
  SolveAttempt at;
  at.alpha0 = x[0];
  at.beta0 = x[1];
  Vec2 fx = f(x);
  const int dims = f.homogeneous ? 1 : 2;
  for (int it = 0; it < opts.max_iterations && std::isfinite(fx.norm()); ++it) {
    if (norm_inf(fx) <= opts.residual_tol) break;
    Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
    bool jac_ok = true;
    for (int j = 2 - dims; j < 2; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
      Vec2 xp = x;
      xp[j] += h;
      const Vec2 fp = f(xp);
      if (!fp.allFinite()) {
        jac_ok = false;
        break;
      }
      J.col(j) = (fp - fx) / h;
    }
    if (!jac_ok) break;
    if (dims == 1) J(0, 0) = 1.0;  // unused first equation

    if (!J.allFinite() || (J.transpose() * fx).norm() == 0.0) break;  // stationary point

    std::vector<Vec2> directions;
    const Eigen::FullPivLU<Eigen::Matrix2d> lu(J);
    if (lu.isInvertible()) directions.push_back(lu.solve(-fx));
    const Eigen::Matrix2d JtJ = J.transpose() * J;
    const double lam0 = 1e-3 * std::max(JtJ.trace(), 1e-12);
    for (double lam = lam0; lam < 1e12 * lam0; lam *= 100.0) {
      Eigen::Matrix2d A = JtJ + lam * Eigen::Matrix2d::Identity();
      directions.push_back(A.ldlt().solve(-J.transpose() * fx));
    }

    const double f0 = fx.norm();
    bool moved = false;
    for (Vec2 d : directions) {
      if (dims == 1) d[0] = 0.0;
      if (!d.allFinite() || d.norm() == 0.0) continue;
      double t = 1.0;
      for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
        const Vec2 xn = x + t * d;
        const Vec2 fn = f(xn);
        if (fn.allFinite() && fn.norm() < (1.0 - 1e-4 * t) * f0) {
          x = xn;
          fx = fn;
          moved = true;
          break;
        }
      }
      if (moved) break;
    }
    if (!moved) break;
    if (std::abs(x[0]) > 1e4 || std::abs(x[1]) > 1e4) break;
  }
  at.alpha = x[0];
  at.beta = x[1];
  at.max_residual = std::isfinite(fx.norm()) ? norm_inf(fx) : kInf;
  at.converged = at.max_residual <= opts.residual_tol;
  return at;
}

}  // namespace

void SolveOptions::validate() const {
  if (!(residual_tol > 0.0)) throw DomainError("residual_tol must be positive");
  if (max_restarts < 1) throw DomainError("max_restarts must be positive");
  if (initial_guesses.empty()) throw DomainError("initial guess list must not be empty");
  if (!(alpha_max > 0.0) || !(beta_max >= beta_min)) throw DomainError("invalid random guess ranges");
  if (max_iterations < 1) throw DomainError("max_iterations must be positive");
}

Eliminated eliminate(const ActivationSpec& spec, double alpha, double beta) {
  return moments(spec, alpha, beta).e;
}

Residuals residuals(const ActivationSpec& spec, double alpha, double beta, double psi,
                    double q_slope_target) {
  return residuals_from(moments(spec, alpha, beta), alpha, psi, q_slope_target);
}

SolveResult solve_transform(const ActivationSpec& spec, double psi, const SolveOptions& opts) {
  opts.validate();
  if (!(psi >= 1.0) || !std::isfinite(psi)) {
    std::ostringstream msg;
    msg << "psi must be a finite value >= 1, got " << psi;
    throw DomainError(msg.str());
  }
  const System f{spec, psi, opts.q_slope_target, spec.homogeneous};

  // Starting points: the fixed list (only distinct betas in the homogeneous
  // case), then random draws.
  std::vector<Vec2> starts;
  for (const auto& [a, b] : opts.initial_guesses) {
    const Vec2 s(spec.homogeneous ? 1.0 : a, b);
    if (std::none_of(starts.begin(), starts.end(), [&](const Vec2& o) { return o == s; }))
      starts.push_back(s);
  }
  Rng rng(opts.seed);

  std::vector<SolveAttempt> history;
  SolveAttempt best;
  best.max_residual = kInf;
  for (int k = 0; k < opts.max_restarts; ++k) {
    Vec2 s;
    if (k < static_cast<int>(starts.size())) {
      s = starts[k];
    } else {
      const double a = opts.alpha_max * (1.0 - rng.uniform());
      const double b = rng.uniform(opts.beta_min, opts.beta_max);
      s = Vec2(spec.homogeneous ? 1.0 : a, b);
    }
    const SolveAttempt at = newton(f, s, opts);
    history.push_back(at);
    if (at.max_residual < best.max_residual) best = at;
    if (at.converged) {
      SolveResult res;
      res.params.alpha = std::abs(at.alpha);
      res.params.beta = at.beta;
      const Moments m = moments(spec, res.params.alpha, res.params.beta);
      res.params.gamma = m.e.gamma;
      res.params.delta = m.e.delta;
      res.psi = psi;
      res.residuals = residuals_from(m, res.params.alpha, psi, opts.q_slope_target);
      res.homogeneous = spec.homogeneous;
      res.history = std::move(history);
      return res;
    }
  }
  std::ostringstream msg;
  msg << "no root found for activation '" << spec.name << "' at psi=" << psi << " after "
      << history.size() << " starting points; best max residual " << best.max_residual
      << " at alpha=" << best.alpha << ", beta=" << best.beta;
  throw ConvergenceError(msg.str(), best, std::move(history));
}

}  // namespace dks
