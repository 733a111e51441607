#pragma once

#include <functional>
#include <vector>

#include "dks/activations.hpp"

namespace dks {

/// q: dimension-normalized squared norm; c: cosine similarity.
struct QCState {
  double q = 1.0;
  double c = 0.0;
};

/// Map quantities of a nonlinear layer at input q (1 unless stated).
struct MapStats {
  double q1 = 0.0;   // Q(1)
  double dq1 = 0.0;  // Q'(1)
  double c0 = 0.0;   // C(0)
  double dc0 = 0.0;  // C'(0)
  double dc1 = 0.0;  // C'(1)
};

// Local Q map: E[phi(sqrt(q) x)^2].
double local_q(const ActivationSpec& spec, double q);
// (1/sqrt(q)) E[phi(sqrt(q) x) phi'(sqrt(q) x) x].
double local_q_deriv(const ActivationSpec& spec, double q);

/// Local C map Gamma_phi(c, q1, q2) / sqrt(Q(q1) Q(q2)). Exactly 1 at c = 1
/// when q1 == q2.
double local_c(const ActivationSpec& spec, double c, double q1, double q2);

/// i-th derivative of the local C map in c at uniform input q:
/// q^i / Q(q) * Gamma_{phi^(i)}(c, q, q). order 0 is the map itself. Throws
/// DomainError when order exceeds spec.max_deriv_order (e.g. i = 2 for RELU,
/// where the formula silently returns the wrong value).
double local_c_deriv(const ActivationSpec& spec, double c, double q, int order);

/// Average unit value E[phi(sqrt(q) x)].
double avg_unit(const ActivationSpec& spec, double q);

/// C(0) = avg_unit^2 / Q(q).
double cmap_zero(const ActivationSpec& spec, double q = 1.0);

MapStats map_stats(const ActivationSpec& spec, double q = 1.0);

/// Squared nonlinearity measure nl^2 = 1 - C'(0) at q = 1.
double nonlinearity(const ActivationSpec& spec);
/// Squared non-affineness measure na^2 = 1 - C'(0) / C'(1) at q = 1.
double nonaffineness(const ActivationSpec& spec);

/// Bounds on the deviation of a C map from the identity function, from its
/// value at 0 and slopes at 0 and 1.
struct DeviationBounds {
  double lower = 0.0;        // 1/4 (1 - C'(0)) <= max |C(c) - c|
  double upper_value = 0.0;  // max |C(c) - c| <= 2 (1 - C'(0))
  double upper_slope = 0.0;  // max |C'(c) - 1| <= 2 (1 - C'(0)) + (C'(1) - 1)
  // The two bounds below hold only when C(0) = 0.
  bool centered = false;
  double upper_value_centered = 0.0;  // 2 (C'(1) - 1)
  double upper_slope_centered = 0.0;  // 3 (C'(1) - 1)
};

/// `centered_tol` decides whether C(0) counts as zero.
DeviationBounds deviation_bounds(const MapStats& stats, double centered_tol = 1e-8);

/// Measured deviation of a C map from the identity on a uniform grid of [-1, 1].
struct Deviation {
  double max_value = 0.0;  // max |C(c) - c|
  double max_slope = 0.0;  // max |C'(c) - 1|, 0 when no derivative supplied
};

inline constexpr int kDeviationGridPoints = 2001;

Deviation measure_deviation(const std::function<double(double)>& cmap,
                            const std::function<double(double)>& cmap_deriv = {},
                            int grid_points = kDeviationGridPoints);

/// Depth-composition of identical nonlinear layers. Element i is the state
/// after layer i + 1; the C map of each layer is evaluated at that layer's
/// input q.
std::vector<QCState> iterate_sequential(const ActivationSpec& spec, int depth, QCState state);

}  // namespace dks
