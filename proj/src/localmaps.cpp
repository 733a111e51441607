#include "dks/localmaps.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dks/errors.hpp"

namespace dks {

namespace {

void require_positive_q(double q) {
  if (!(q > 0.0) || !std::isfinite(q)) {
    std::ostringstream msg;
    msg << "q must be positive and finite, got " << q;
    throw DomainError(msg.str());
  }
}

std::vector<double> scaled_kinks(const ActivationSpec& spec, double q) {
  std::vector<double> out;
  const double s = std::sqrt(q);
  for (double k : spec.kinks) out.push_back(k / s);
  return out;
}

const ScalarFn& derivative_fn(const ActivationSpec& spec, int order) {
  switch (order) {
    case 0:
      return spec.phi;
    case 1:
      return spec.dphi;
    default:
      return spec.d2phi;
  }
}

}  // namespace

double local_q(const ActivationSpec& spec, double q) {
  require_positive_q(q);
  const double s = std::sqrt(q);
  const auto breaks = scaled_kinks(spec, q);
  return gauss_expect(
      [&](double x) {
        const double v = spec.phi(s * x);
        return v * v;
      },
      default_rule(), breaks);
}

double local_q_deriv(const ActivationSpec& spec, double q) {
  require_positive_q(q);
  const double s = std::sqrt(q);
  const auto breaks = scaled_kinks(spec, q);
  const double e = gauss_expect(
      [&](double x) { return spec.phi(s * x) * spec.dphi(s * x) * x; }, default_rule(), breaks);
  return e / s;
}

double local_c(const ActivationSpec& spec, double c, double q1, double q2) {
  require_positive_q(q1);
  require_positive_q(q2);
  if (!(std::abs(c) <= 1.0)) {
    std::ostringstream msg;
    msg << "c must lie in [-1, 1], got " << c;
    throw DomainError(msg.str());
  }
  if (q1 == q2 && 1.0 - c <= kDegenerateCorrelation) return 1.0;
  const Integrand f{spec.phi, spec.kinks};
  const double gamma = gauss_expect_2d(f, f, c, q1, q2, default_rule_2d());
  const double norm = q1 == q2 ? local_q(spec, q1) : std::sqrt(local_q(spec, q1) * local_q(spec, q2));
  if (!(norm > 0.0)) throw DegenerateActivationError("activation has Q(q) = 0; C map undefined");
  return gamma / norm;
}

double local_c_deriv(const ActivationSpec& spec, double c, double q, int order) {
  if (order < 0) throw DomainError("derivative order must be non-negative");
  if (order == 0) return local_c(spec, c, q, q);
  if (order > spec.max_deriv_order || !derivative_fn(spec, order)) {
    std::ostringstream msg;
    msg << "C map derivative of order " << order << " is not available for activation '"
        << spec.name << "' (max order " << spec.max_deriv_order << ")";
    throw DomainError(msg.str());
  }
  require_positive_q(q);
  const Integrand f{derivative_fn(spec, order), spec.kinks};
  const double gamma = gauss_expect_2d(f, f, c, q, q, default_rule_2d());
  const double qq = local_q(spec, q);
  if (!(qq > 0.0)) throw DegenerateActivationError("activation has Q(q) = 0; C map undefined");
  return std::pow(q, order) / qq * gamma;
}

double avg_unit(const ActivationSpec& spec, double q) {
  require_positive_q(q);
  const double s = std::sqrt(q);
  const auto breaks = scaled_kinks(spec, q);
  return gauss_expect([&](double x) { return spec.phi(s * x); }, default_rule(), breaks);
}

double cmap_zero(const ActivationSpec& spec, double q) {
  const double m = avg_unit(spec, q);
  const double qq = local_q(spec, q);
  if (!(qq > 0.0)) throw DegenerateActivationError("activation has Q(q) = 0; C map undefined");
  return m * m / qq;
}

MapStats map_stats(const ActivationSpec& spec, double q) {
  MapStats s;
  s.q1 = local_q(spec, q);
  s.dq1 = local_q_deriv(spec, q);
  s.c0 = cmap_zero(spec, q);
  s.dc0 = local_c_deriv(spec, 0.0, q, 1);
  s.dc1 = local_c_deriv(spec, 1.0, q, 1);
  return s;
}

double nonlinearity(const ActivationSpec& spec) {
  return 1.0 - local_c_deriv(spec, 0.0, 1.0, 1);
}

double nonaffineness(const ActivationSpec& spec) {
  return 1.0 - local_c_deriv(spec, 0.0, 1.0, 1) / local_c_deriv(spec, 1.0, 1.0, 1);
}

DeviationBounds deviation_bounds(const MapStats& stats, double centered_tol) {
  DeviationBounds b;
  b.lower = 0.25 * (1.0 - stats.dc0);
  b.upper_value = 2.0 * (1.0 - stats.dc0);
  b.upper_slope = 2.0 * (1.0 - stats.dc0) + (stats.dc1 - 1.0);
  b.centered = std::abs(stats.c0) <= centered_tol;
  if (b.centered) {
    b.upper_value_centered = 2.0 * (stats.dc1 - 1.0);
    b.upper_slope_centered = 3.0 * (stats.dc1 - 1.0);
  }
  return b;
}

Deviation measure_deviation(const std::function<double(double)>& cmap,
                            const std::function<double(double)>& cmap_deriv, int grid_points) {
  if (grid_points < 2) throw DomainError("deviation grid needs at least 2 points");
  Deviation d;
  for (int i = 0; i < grid_points; ++i) {
    const double c = -1.0 + 2.0 * i / (grid_points - 1);
    d.max_value = std::max(d.max_value, std::abs(cmap(c) - c));
    if (cmap_deriv) d.max_slope = std::max(d.max_slope, std::abs(cmap_deriv(c) - 1.0));
  }
  return d;
}

std::vector<QCState> iterate_sequential(const ActivationSpec& spec, int depth, QCState state) {
  if (depth < 1) throw DomainError("depth must be positive");
  std::vector<QCState> out;
  out.reserve(depth);
  for (int i = 0; i < depth; ++i) {
    const double q_in = state.q;
    state.q = local_q(spec, q_in);
    state.c = std::clamp(local_c(spec, state.c, q_in, q_in), -1.0, 1.0);
    out.push_back(state);
  }
  return out;
}

}  // namespace dks
