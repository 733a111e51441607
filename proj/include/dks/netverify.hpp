#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dks/activations.hpp"
#include "dks/localmaps.hpp"

namespace dks {

enum class InitScheme { Suo, Gaussian };

/// Fully-connected stack of combined layers h_l = phi(W_l h_{l-1} + b_l).
struct DenseNet {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;  // zero at initialization
  std::vector<ActivationSpec> activations;
  std::vector<int> widths;  // widths[0] is the input dimension

  int depth() const { return static_cast<int>(weights.size()); }

  /// Activations of every layer for a batch of inputs (one per column);
  /// element 0 is the input itself.
  std::vector<Eigen::MatrixXd> forward_all(const Eigen::MatrixXd& inputs) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
};

/// depth layers of the given width (input dimension = width). Layer l draws
/// its weights from Rng(derive_seed(seed, l)).
DenseNet build_dense(int depth, int width, const ActivationSpec& spec, InitScheme scheme,
                     std::uint64_t seed);

struct LayerStats {
  int layer = 0;         // 0 = input
  double q_mean = 0.0;   // mean over inputs of ||h||^2 / dim
  double q_std = 0.0;
  double c_mean = 0.0;   // mean over input pairs of the cosine similarity
  double c_std = 0.0;
};

/// Per-layer empirical q / c statistics. Reductions use pairwise summation
/// in a fixed order so results do not depend on scheduling.
std::vector<LayerStats> empirical_qc(const DenseNet& net, const Eigen::MatrixXd& inputs);

/// Pairwise (cascade) summation.
double pairwise_sum(const double* v, std::size_t n);

struct NtkResult {
  std::vector<double> theta;          // Theta_i, i = 1..D, chain-rule form
  std::vector<double> theta_product;  // same from the product-of-Gammas form
  double c0 = 0.0;
  double q_final = 1.0;               // q_D
  double max_discrepancy = 0.0;       // max |theta - theta_product|
};

/// Analytic per-layer NTK contributions of a depth-D MLP whose layers all use
/// `spec`: Theta_i = q_D C_{g_i}(c0) C'_{h_i}(C_{g_i}(c0)), with g_i the layers
/// before layer i and h_i the rest. Throws DomainError for |c0| > 1.
NtkResult ntk_per_layer(int depth, const ActivationSpec& spec, double c0, double q0 = 1.0);

/// PLN-normalized random inputs: n columns of dimension dim with
/// ||x||^2 = dim, drawn from a standard normal and rescaled.
Eigen::MatrixXd random_unit_inputs(int dim, int n, std::uint64_t seed);

}  // namespace dks
