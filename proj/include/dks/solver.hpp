#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dks/activations.hpp"
#include "dks/errors.hpp"

namespace dks {

struct SolveOptions {
  double residual_tol = 1e-8;
  int max_restarts = 50;  // total number of starting points tried
  std::vector<std::pair<double, double>> initial_guesses{{1.0, 0.0},  {1.0, 1.0},  {1.0, -1.0},
                                                         {0.1, 0.0},  {0.1, 1.0},  {0.1, -1.0}};
  // Random guesses after the list is exhausted: alpha in (0, alpha_max],
  // beta in [beta_min, beta_max].
  double alpha_max = 2.0;
  double beta_min = -3.0;
  double beta_max = 3.0;
  std::uint64_t seed = 0;
  // Target for Q'(1); 1 for DKS, other values only for ablations.
  double q_slope_target = 1.0;
  int max_iterations = 100;

  void validate() const;
};

struct Eliminated {
  double delta = 0.0;
  double gamma = 1.0;
};

/// delta = -E[phi(alpha x + beta)], gamma = Var[phi(alpha x + beta)]^(-1/2):
/// the unique pair giving C(0) = 0 and Q(1) = 1. Throws
/// DegenerateActivationError when the variance vanishes.
Eliminated eliminate(const ActivationSpec& spec, double alpha, double beta);

struct Residuals {
  double q_slope = 0.0;  // E[phi_hat phi_hat' x] - q_slope_target
  double c_slope = 0.0;  // E[phi_hat'^2] - psi
};

Residuals residuals(const ActivationSpec& spec, double alpha, double beta, double psi,
                    double q_slope_target = 1.0);

struct SolveAttempt {
  double alpha0 = 0.0;
  double beta0 = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double max_residual = 0.0;
  bool converged = false;
};

struct SolveResult {
  TransformParams params;
  double psi = 1.0;
  Residuals residuals;
  bool homogeneous = false;  // only C'(1) = psi was solved for; alpha fixed at 1
  std::vector<SolveAttempt> history;
};

/// No starting point converged; carries the best point seen and all attempts.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, SolveAttempt best, std::vector<SolveAttempt> history)
      : Error(what), best_(best), history_(std::move(history)) {}
  const SolveAttempt& best() const { return best_; }
  const std::vector<SolveAttempt>& history() const { return history_; }

 private:
  SolveAttempt best_;
  std::vector<SolveAttempt> history_;
};

/// Finds transform constants with Q(1) = 1, C(0) = 0, Q'(1) = target and
/// C'(1) = psi. Positively homogeneous activations (registry flag) fix
/// alpha = 1 and solve C'(1) = psi for beta alone. Returned alpha is positive
/// (the conditions are even in alpha).
SolveResult solve_transform(const ActivationSpec& spec, double psi, const SolveOptions& opts = {});

}  // namespace dks
