#pragma once

#include <string>

#include <Eigen/Dense>

namespace dks {

/// Feature map: channels x locations.
using FeatureMap = Eigen::MatrixXd;

/// Per-location normalization with a data-dependent extra channel
/// m = sqrt(E_j ||x_j||^2 / k): column i becomes
/// sqrt(k + 1) / sqrt(||x_i||^2 + m^2) [x_i; m], so every output column has
/// squared norm k + 1. Throws DomainError on an all-zero or non-finite input.
FeatureMap pln(const FeatureMap& x);

/// Variant with a constant extra channel c != 0:
/// x -> sqrt(k + 1) / sqrt(||x||^2 + c^2) [x; c]. Invertible per location.
FeatureMap pln_const(const FeatureMap& x, double c = 1.0);

/// Recovers x from pln_const(x, c).
FeatureMap pln_const_inverse(const FeatureMap& y, double c = 1.0);

/// CSV with one row per channel and one column per location.
FeatureMap read_feature_csv(const std::string& text);
std::string write_feature_csv(const FeatureMap& x);

}  // namespace dks
