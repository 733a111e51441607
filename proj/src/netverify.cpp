#include "dks/netverify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dks/errors.hpp"
#include "dks/init.hpp"
#include "dks/quadrature.hpp"
#include "dks/rng.hpp"

namespace dks {

std::vector<Eigen::MatrixXd> DenseNet::forward_all(const Eigen::MatrixXd& inputs) const {
  if (!widths.empty() && inputs.rows() != widths[0])
    throw ShapeError("input dimension " + std::to_string(inputs.rows()) + " does not match network input width " +
                     std::to_string(widths[0]));
  std::vector<Eigen::MatrixXd> out{inputs};
  for (int l = 0; l < depth(); ++l) {
    Eigen::MatrixXd z = weights[l] * out.back();
    z.colwise() += biases[l];
    const ActivationSpec& act = activations[l];
    z = z.unaryExpr([&](double u) { return act.phi(u); });
    out.push_back(std::move(z));
  }
  return out;
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& inputs) const {
  return forward_all(inputs).back();
}

DenseNet build_dense(int depth, int width, const ActivationSpec& spec, InitScheme scheme,
                     std::uint64_t seed) {
  if (depth < 0) throw DomainError("depth must be non-negative");
  if (width < 1 || width > 2048) throw DomainError("width must lie in [1, 2048]");
  DenseNet net;
  net.widths.assign(depth + 1, width);
  for (int l = 0; l < depth; ++l) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(l)));
    net.weights.push_back(scheme == InitScheme::Suo ? sample_suo(width, width, rng)
                                                    : sample_gaussian(width, width, rng));
    net.biases.push_back(Eigen::VectorXd::Zero(width));
    net.activations.push_back(spec);
  }
  return net;
}

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  if (v.empty()) {
    mean = sd = 0.0;
    return;
  }
  mean = pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size());
  std::vector<double> d(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - mean) * (v[i] - mean);
  sd = std::sqrt(pairwise_sum(d.data(), d.size()) / static_cast<double>(v.size()));
}

}  // namespace

std::vector<LayerStats> empirical_qc(const DenseNet& net, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() < 1) throw ShapeError("empirical_qc needs at least one input");
  const auto acts = net.forward_all(inputs);
  std::vector<LayerStats> out;
  for (std::size_t l = 0; l < acts.size(); ++l) {
    const Eigen::MatrixXd& h = acts[l];
    const double dim = static_cast<double>(h.rows());
    const Eigen::Index n = h.cols();
    std::vector<double> qs(n), cs;
    Eigen::VectorXd norms(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = h.col(i).squaredNorm();
      qs[i] = s / dim;
      norms[i] = std::sqrt(s);
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double den = norms[i] * norms[j];
        cs.push_back(den > 0.0 ? h.col(i).dot(h.col(j)) / den : 0.0);
      }
    LayerStats st;
    st.layer = static_cast<int>(l);
    mean_std(qs, st.q_mean, st.q_std);
    mean_std(cs, st.c_mean, st.c_std);
    out.push_back(st);
  }
  return out;
}

NtkResult ntk_per_layer(int depth, const ActivationSpec& spec, double c0, double q0) {
  if (depth < 1) throw DomainError("depth must be positive");
  if (!(std::abs(c0) <= 1.0)) {
    std::ostringstream msg;
    msg << "c0 must lie in [-1, 1], got " << c0;
    throw DomainError(msg.str());
  }
  if (!(q0 > 0.0)) throw DomainError("q0 must be positive");

  // Forward pass: q_j, c_j after layer j (index 0 = input).
  std::vector<double> q{q0}, c{c0};
  for (int j = 0; j < depth; ++j) {
    c.push_back(std::clamp(local_c(spec, c[j], q[j], q[j]), -1.0, 1.0));
    q.push_back(local_q(spec, q[j]));
  }
  const Integrand dphi{spec.dphi, spec.kinks};
  std::vector<double> slope(depth), gamma(depth);
  for (int j = 0; j < depth; ++j) {
    slope[j] = local_c_deriv(spec, c[j], q[j], 1);
    gamma[j] = gauss_expect_2d(dphi, dphi, c[j], q[j], q[j], default_rule_2d());
  }

  NtkResult r;
  r.c0 = c0;
  r.q_final = q[depth];
  r.theta.resize(depth);
  r.theta_product.resize(depth);
  double chain = 1.0, prod = 1.0;
  for (int i = depth - 1; i >= 0; --i) {
    chain *= slope[i];
    prod *= gamma[i];
    r.theta[i] = q[depth] * c[i] * chain;
    r.theta_product[i] = q[i] * c[i] * prod;
    r.max_discrepancy = std::max(r.max_discrepancy, std::abs(r.theta[i] - r.theta_product[i]));
  }
  return r;
}

Eigen::MatrixXd random_unit_inputs(int dim, int n, std::uint64_t seed) {
  if (dim < 1 || n < 1) throw DomainError("input dimension and count must be positive");
  Rng rng(seed);
  Eigen::MatrixXd x(dim, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < dim; ++i) x(i, j) = rng.normal();
    x.col(j) *= std::sqrt(static_cast<double>(dim)) / x.col(j).norm();
  }
  return x;
}

}  // namespace dks
