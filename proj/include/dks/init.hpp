#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dks/graph.hpp"
#include "dks/rng.hpp"
#include "dks/tensor_io.hpp"

namespace dks {

/// m x k matrix from the scale-corrected uniform orthogonal distribution:
/// (X X^T)^(-1/2) X for m <= k (orthonormal rows); for m > k the transpose
/// construction scaled by sqrt(m / k), so W^T W = (m / k) I.
Eigen::MatrixXd sample_suo(int m, int k, Rng& rng);
Eigen::MatrixXd sample_suo(int m, int k, std::uint64_t seed);

/// Entries iid N(0, 1 / k).
Eigen::MatrixXd sample_gaussian(int m, int k, Rng& rng);

struct FilterShape {
  int filter_h = 1;
  int filter_w = 1;
  int in_channels = 1;   // k
  int out_channels = 1;  // m
};

/// Convolution filter bank of shape (filter_h, filter_w, k, m), stored
/// row-major in that index order.
struct FilterBank {
  FilterShape shape;
  std::vector<double> data;

  explicit FilterBank(FilterShape s);

  double& at(int h, int w, int i, int o);
  double at(int h, int w, int i, int o) const;
  /// Weights at one spatial offset as an m x k matrix.
  Eigen::MatrixXd slice(int h, int w) const;
  /// The central offset (0-based (filter_h / 2, filter_w / 2)).
  Eigen::MatrixXd central() const { return slice(shape.filter_h / 2, shape.filter_w / 2); }
};

/// Delta initializations: zero everywhere except the central offset, which
/// holds a Gaussian (N(0, 1/k)) or SUO matrix. Filter sizes must be odd.
FilterBank gaussian_delta(const FilterShape& shape, Rng& rng);
FilterBank orthogonal_delta(const FilterShape& shape, Rng& rng);
FilterBank gaussian_delta(const FilterShape& shape, std::uint64_t seed);
FilterBank orthogonal_delta(const FilterShape& shape, std::uint64_t seed);

enum class DeltaScheme { Orthogonal, Gaussian };

/// Weights ("<id>.weight", shape (filter_h, filter_w, k, m)) and zero biases
/// ("<id>.bias", shape (m)) for every affine node, in graph order. Node i of
/// the graph draws from Rng(derive_seed(seed, i)). Throws GraphError for
/// invalid graphs.
std::vector<Tensor> initialize_graph(const NetworkGraph& g, DeltaScheme scheme, std::uint64_t seed);

}  // namespace dks
