#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dks/errors.hpp"
#include "dks/graph.hpp"
#include "dks/rng.hpp"
#include "dks/netverify.hpp"
#include "dks/solver.hpp"
#include "oracle.hpp"

using namespace dks;

TEST_CASE("ntk of a linear network is the input kernel") {
  const NtkResult r = ntk_per_layer(6, registry_get("identity"), 0.37);
  REQUIRE(r.theta.size() == 6);
  for (double t : r.theta) CHECK(t == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(r.max_discrepancy < 1e-12);
}

TEST_CASE("ntk of a sqrt(2)-relu net follows the arc-cosine recursion") {
  TransformParams p;
  p.gamma = std::sqrt(2.0);
  const ActivationSpec s = transform(registry_get("relu"), p);
  const int D = 4;
  const double c0 = 0.2;
  // c_j from the closed form, slopes C'(c) = (pi - acos c) / pi
  std::vector<double> c{c0};
  for (int j = 0; j < D; ++j) c.push_back(oracle::relu_cmap(c.back()));
  const NtkResult r = ntk_per_layer(D, s, c0);
  for (int i = 0; i < D; ++i) {
    double want = c[i];
    for (int j = i; j < D; ++j) want *= (std::numbers::pi - std::acos(c[j])) / std::numbers::pi;
    CHECK(r.theta[i] == doctest::Approx(want).epsilon(1e-6));
  }
  CHECK(r.q_final == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.max_discrepancy < 1e-8);
}

TEST_CASE("ntk argument checks") {
  CHECK_THROWS_AS(ntk_per_layer(0, registry_get("tanh"), 0.1), DomainError);
  CHECK_THROWS_AS(ntk_per_layer(3, registry_get("tanh"), 1.2), DomainError);
}

TEST_CASE("dks tanh ntk stays close to the input kernel") {
  const double zeta = 1.05;
  const auto& t = registry_get("tanh");
  const ActivationSpec s = transform(t, solve_transform(t, std::pow(zeta, 0.1)).params);
  for (double c0 : {-0.8, 0.0, 0.4, 0.9}) {
    const NtkResult r = ntk_per_layer(10, s, c0);
    for (double th : r.theta) CHECK(std::abs(th - c0) <= 11 * (zeta - 1));
    CHECK(r.max_discrepancy < 1e-8);
  }
}

TEST_CASE("linear SUO network preserves q exactly") {
  const DenseNet net = build_dense(5, 32, registry_get("identity"), InitScheme::Suo, 3);
  const auto st = empirical_qc(net, random_unit_inputs(32, 6, 4));
  REQUIRE(st.size() == 6);
  for (const LayerStats& s : st) {
    CHECK(s.q_mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.q_std < 1e-12);
    CHECK(s.c_mean == doctest::Approx(st[0].c_mean).epsilon(1e-10));
  }
}

TEST_CASE("dense net shapes and errors") {
  const DenseNet net = build_dense(2, 8, registry_get("tanh"), InitScheme::Gaussian, 1);
  CHECK(net.forward(Eigen::MatrixXd::Ones(8, 3)).rows() == 8);
  CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Ones(7, 3)), ShapeError);
  CHECK_THROWS_AS(build_dense(2, 4096, registry_get("tanh"), InitScheme::Suo, 1), DomainError);
}

TEST_CASE("pairwise sum") {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * i;
  CHECK(pairwise_sum(v.data(), v.size()) == doctest::Approx(49950.0).epsilon(1e-13));
  CHECK(pairwise_sum(v.data(), 0) == 0.0);
}

TEST_CASE("trivial networks") {
  const Eigen::MatrixXd x = random_unit_inputs(4, 3, 1);
  CHECK(build_dense(0, 4, registry_get("tanh"), InitScheme::Suo, 1).forward(x) == x);
  const DenseNet one = build_dense(1, 4, registry_get("identity"), InitScheme::Suo, 2);
  CHECK((one.forward(x) - one.weights[0] * x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((one.weights[0] * one.weights[0].transpose() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("sqrt(2)-relu ntk diagonal is 1 and the off-diagonal degenerates with depth") {
  TransformParams p;
  p.gamma = std::sqrt(2.0);
  const ActivationSpec s = transform(registry_get("relu"), p);
  const NtkResult same = ntk_per_layer(100, s, 1.0);
  for (double t : same.theta) CHECK(t == doctest::Approx(1.0).epsilon(1e-8));
  const NtkResult r = ntk_per_layer(100, s, 0.5);
  CHECK(r.theta.front() <= 0.3);
  CHECK(r.theta.back() >= 0.9);
}

TEST_CASE("empirical c values follow the propagated C map") {
  const auto& t = registry_get("tanh");
  const ActivationSpec s = transform(t, solve_transform(t, std::pow(1.5, 1.0 / 3)).params);
  const int width = 1024, pairs = 200;
  const DenseNet net = build_dense(3, width, s, InitScheme::Suo, 21);
  const NetworkGraph g = mlp(3, "tanh");
  const ActivationTable tab{{"tanh", s}};

  Rng rng(22);
  Eigen::MatrixXd xs(width, 2 * pairs);
  std::vector<double> c0(pairs);
  for (int k = 0; k < pairs; ++k) {
    Eigen::VectorXd a(width), b(width);
    for (int i = 0; i < width; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    a.normalize();
    b -= b.dot(a) * a;
    b.normalize();
    c0[k] = rng.uniform(-1.0, 1.0);
    xs.col(2 * k) = std::sqrt(double(width)) * a;
    xs.col(2 * k + 1) = std::sqrt(double(width)) * (c0[k] * a + std::sqrt(1 - c0[k] * c0[k]) * b);
  }
  const Eigen::MatrixXd out = net.forward(xs);
  double err = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const double emp = out.col(2 * k).dot(out.col(2 * k + 1)) / (out.col(2 * k).norm() * out.col(2 * k + 1).norm());
    err += std::abs(emp - qc_propagate(g, tab, {1.0, c0[k]}).states.at(g.output).c);
  }
  CHECK(err / pairs <= 0.05);
}

TEST_CASE("empirical statistics are bit reproducible") {
  const auto& t = registry_get("softplus");
  const DenseNet a = build_dense(4, 64, t, InitScheme::Suo, 9);
  const DenseNet b = build_dense(4, 64, t, InitScheme::Suo, 9);
  const Eigen::MatrixXd x = random_unit_inputs(64, 10, 10);
  const auto sa = empirical_qc(a, x), sb = empirical_qc(b, x);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sa[i].q_mean == sb[i].q_mean);
    CHECK(sa[i].c_std == sb[i].c_std);
  }
}
