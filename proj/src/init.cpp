#include "dks/init.hpp"

#include <cmath>
#include <string>

#include "dks/errors.hpp"

namespace dks {

namespace {

Eigen::MatrixXd gaussian_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) x(i, j) = rng.normal();
  return x;
}

// (X X^T)^(-1/2) X for a wide (rows <= cols) X; empty on a degenerate Gram matrix.
Eigen::MatrixXd orthonormal_rows(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd gram = x * x.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success) return {};
  const Eigen::VectorXd ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-12 * ev.maxCoeff())) return {};
  const Eigen::MatrixXd inv_sqrt =
      es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return inv_sqrt * x;
}

void check_dims(int m, int k) {
  if (m < 1 || k < 1)
    throw DomainError("matrix dimensions must be positive, got " + std::to_string(m) + "x" +
                      std::to_string(k));
}

void check_shape(const FilterShape& s) {
  check_dims(s.out_channels, s.in_channels);
  if (s.filter_h < 1 || s.filter_w < 1 || s.filter_h % 2 == 0 || s.filter_w % 2 == 0)
    throw ShapeError("Delta initialization needs odd filter sizes, got " + std::to_string(s.filter_h) +
                     "x" + std::to_string(s.filter_w));
}

FilterBank delta(const FilterShape& shape, const Eigen::MatrixXd& center) {
  FilterBank fb(shape);
  const int ch = shape.filter_h / 2, cw = shape.filter_w / 2;
  for (int i = 0; i < shape.in_channels; ++i)
    for (int o = 0; o < shape.out_channels; ++o) fb.at(ch, cw, i, o) = center(o, i);
  return fb;
}

}  // namespace

Eigen::MatrixXd sample_suo(int m, int k, Rng& rng) {
  check_dims(m, k);
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (m <= k) {
      Eigen::MatrixXd w = orthonormal_rows(gaussian_matrix(m, k, rng));
      if (w.size() != 0) return w;
    } else {
      Eigen::MatrixXd w = orthonormal_rows(gaussian_matrix(k, m, rng));
      if (w.size() != 0) return std::sqrt(static_cast<double>(m) / k) * w.transpose();
    }
  }
  throw DomainError("SUO sampling hit a degenerate Gram matrix three times");
}

Eigen::MatrixXd sample_suo(int m, int k, std::uint64_t seed) {
  Rng rng(seed);
  return sample_suo(m, k, rng);
}

Eigen::MatrixXd sample_gaussian(int m, int k, Rng& rng) {
  check_dims(m, k);
  return gaussian_matrix(m, k, rng) / std::sqrt(static_cast<double>(k));
}

FilterBank::FilterBank(FilterShape s)
    : shape(s),
      data(static_cast<std::size_t>(s.filter_h) * s.filter_w * s.in_channels * s.out_channels, 0.0) {}

double& FilterBank::at(int h, int w, int i, int o) {
  return data[((static_cast<std::size_t>(h) * shape.filter_w + w) * shape.in_channels + i) *
                  shape.out_channels +
              o];
}

double FilterBank::at(int h, int w, int i, int o) const {
  return const_cast<FilterBank*>(this)->at(h, w, i, o);
}

Eigen::MatrixXd FilterBank::slice(int h, int w) const {
  Eigen::MatrixXd out(shape.out_channels, shape.in_channels);
  for (int i = 0; i < shape.in_channels; ++i)
    for (int o = 0; o < shape.out_channels; ++o) out(o, i) = at(h, w, i, o);
  return out;
}

FilterBank gaussian_delta(const FilterShape& shape, Rng& rng) {
  check_shape(shape);
  return delta(shape, sample_gaussian(shape.out_channels, shape.in_channels, rng));
}

FilterBank orthogonal_delta(const FilterShape& shape, Rng& rng) {
  check_shape(shape);
  return delta(shape, sample_suo(shape.out_channels, shape.in_channels, rng));
}

FilterBank gaussian_delta(const FilterShape& shape, std::uint64_t seed) {
  Rng rng(seed);
  return gaussian_delta(shape, rng);
}

FilterBank orthogonal_delta(const FilterShape& shape, std::uint64_t seed) {
  Rng rng(seed);
  return orthogonal_delta(shape, rng);
}

std::vector<Tensor> initialize_graph(const NetworkGraph& g, DeltaScheme scheme, std::uint64_t seed) {
  for (const Violation& v : validate(g)) {
    if (v.rule != "unnormalized-sum")
      throw GraphError("cannot initialize invalid graph" +
                       (v.node.empty() ? std::string() : " at node '" + v.node + "'") + ": " + v.message);
  }
  const auto channels = channel_counts(g);
  std::vector<Tensor> out;
  for (std::size_t idx = 0; idx < g.nodes.size(); ++idx) {
    const Node& n = g.nodes[idx];
    if (n.kind != NodeKind::Affine) continue;
    FilterShape s{n.filter_h, n.filter_w, channels.at(n.parents.at(0)), n.out_channels};
    Rng rng(derive_seed(seed, idx));
    const FilterBank fb = scheme == DeltaScheme::Orthogonal ? orthogonal_delta(s, rng) : gaussian_delta(s, rng);
    Tensor w;
    w.name = n.id + ".weight";
    w.shape = {static_cast<std::uint64_t>(s.filter_h), static_cast<std::uint64_t>(s.filter_w),
               static_cast<std::uint64_t>(s.in_channels), static_cast<std::uint64_t>(s.out_channels)};
    w.data = fb.data;
    Tensor b;
    b.name = n.id + ".bias";
    b.shape = {static_cast<std::uint64_t>(s.out_channels)};
    b.data.assign(s.out_channels, 0.0);
    out.push_back(std::move(w));
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace dks
