#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dks/quadrature.hpp"

namespace dks {

/// A scalar activation function with its derivatives.
///
/// `kinks` lists the inputs where phi or one of the supplied derivatives is
/// not smooth; quadrature splits there. `max_deriv_order` is the largest i for
/// which phi^(i) is supplied and phi^(i-1) is continuous, i.e. the largest
/// order for which the Gamma-derivative formula of local C maps holds.
struct ActivationSpec {
  std::string name;
  ScalarFn phi;
  ScalarFn dphi;
  ScalarFn d2phi;  // empty when not available
  std::vector<double> kinks;
  int max_deriv_order = 1;
  bool homogeneous = false;  // positively homogeneous of degree 1

  double operator()(double u) const { return phi(u); }
};

/// Constants of the transformed activation u -> gamma * (phi(alpha u + beta) + delta).
struct TransformParams {
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 1.0;
  double delta = 0.0;

  /// Throws DomainError unless alpha != 0, gamma > 0 and all are finite.
  void validate() const;
};

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kLeakyReluSlope = 0.01;

/// Looks up a base activation by its lower-case name. Throws
/// UnknownActivationError listing the registered names otherwise.
const ActivationSpec& registry_get(std::string_view name);

/// Registered names in registration order.
const std::vector<std::string>& registry_names();

/// Returns the spec of gamma * (phi(alpha u + beta) + delta). The result is
/// never flagged homogeneous.
ActivationSpec transform(const ActivationSpec& spec, const TransformParams& p);

struct AffineParams {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

/// Which neighbouring affine layer absorbs the transform constants.
enum class AbsorbSide {
  // The affine layer feeding the nonlinearity: W' = alpha W, b' = alpha b + beta 1.
  Input,
  // The affine layer consuming the nonlinearity's output: W' = gamma W,
  // b' = gamma delta W 1 + b.
  Output,
};

/// Folds the input (alpha, beta) or output (gamma, delta) constants into an
/// adjacent affine layer so that the untransformed activation computes the
/// same function. Throws ShapeError when bias and weights disagree.
AffineParams equivalent_parameters(const TransformParams& p, const AffineParams& layer,
                                   AbsorbSide side);

}  // namespace dks
