#pragma once

#include <functional>
#include <span>
#include <vector>

namespace dks {

using ScalarFn = std::function<double(double)>;

/// Gauss-Legendre rule on the truncation interval [-10, 10].
///
/// Weights are the plain Legendre weights; the standard normal density is
/// applied at evaluation time so the same rule can be remapped onto
/// sub-intervals when an integrand has kinks.
struct QuadRule {
  int order = 0;
  std::vector<double> nodes;    // strictly increasing, in [-10, 10]
  std::vector<double> weights;  // positive
};

inline constexpr double kTruncation = 10.0;
inline constexpr int kDefaultOrder = 10000;
inline constexpr int kDefaultOrder2d = 256;
// |c| within this distance of 1 is treated as exactly +-1.
inline constexpr double kDegenerateCorrelation = 1e-9;

/// Builds (or fetches from the process-wide cache) the rule of a given order.
/// Tables are computed once by Newton iteration on Legendre polynomials and
/// never mutated afterwards, so the returned reference is safe to share.
const QuadRule& gauss_legendre_rule(int order);

/// Default 1-D rule. The order is read once from KS_QUAD_ORDER when set,
/// otherwise kDefaultOrder.
const QuadRule& default_rule();
/// Default per-axis rule for bivariate expectations.
const QuadRule& default_rule_2d();

/// A scalar function together with the points where it (or its derivative)
/// is not smooth. Integration splits the interval at these points, which
/// restores the spectral convergence of Gauss-Legendre for RELU-like kinks.
struct Integrand {
  ScalarFn fn;
  std::vector<double> kinks;
};

/// E_{x~N(0,1)}[h(x)] truncated to [-10, 10].
/// `breakpoints` are abscissae at which h is not smooth; the rule is remapped
/// onto each piece. Throws QuadratureError on a non-finite h value.
double gauss_expect(const ScalarFn& h, const QuadRule& rule,
                    std::span<const double> breakpoints = {});

/// E_{x,y~N(0,1)}[f(sqrt(q1) x) g(sqrt(q2) (c x + sqrt(1-c^2) y))].
/// With f = g = phi this is Gamma_phi(c, q1, q2). For |c| within
/// kDegenerateCorrelation of 1 the inner argument collapses to
/// sign(c) sqrt(q2) x and a 1-D integral is used, with the default 1-D rule
/// when that is finer than `rule`.
double gauss_expect_2d(const Integrand& f, const Integrand& g, double c,
                       double q1, double q2, const QuadRule& rule);

/// Standard normal density.
double normal_pdf(double x);

}  // namespace dks
