#include <doctest.h>

#include <cmath>

#include "dks/activations.hpp"
#include "dks/errors.hpp"

using namespace dks;

TEST_CASE("registry lookup") {
  for (const auto& n : registry_names()) CHECK(registry_get(n).name == n);
  CHECK_THROWS_AS(registry_get("gelu2"), UnknownActivationError);
  CHECK(registry_get("relu").homogeneous);
  CHECK(registry_get("leaky_relu").homogeneous);
  CHECK_FALSE(registry_get("tanh").homogeneous);
}

TEST_CASE("derivatives match finite differences") {
  for (const auto& n : registry_names()) {
    const auto& s = registry_get(n);
    for (double u : {-2.3, -0.7, 0.4, 1.9}) {
      const double h = 1e-6;
      const double fd = (s.phi(u + h) - s.phi(u - h)) / (2 * h);
      CAPTURE(n);
      CAPTURE(u);
      CHECK(s.dphi(u) == doctest::Approx(fd).epsilon(1e-6));
      if (s.d2phi) {
        const double fd2 = (s.dphi(u + h) - s.dphi(u - h)) / (2 * h);
        CHECK(s.d2phi(u) == doctest::Approx(fd2).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("selu constants") {
  const auto& s = registry_get("selu");
  CHECK(s.phi(1.0) == doctest::Approx(kSeluLambda));
  CHECK(s.phi(-1.0) == doctest::Approx(kSeluLambda * kSeluAlpha * (std::exp(-1.0) - 1.0)));
}

TEST_CASE("transform composes the affine maps") {
  const auto& t = registry_get("tanh");
  const TransformParams p{0.5, -0.2, 3.0, 0.1};
  const ActivationSpec f = transform(t, p);
  for (double u : {-3.0, 0.0, 1.25}) {
    CHECK(f.phi(u) == doctest::Approx(3.0 * (std::tanh(0.5 * u - 0.2) + 0.1)));
    CHECK(f.dphi(u) == doctest::Approx(1.5 / std::pow(std::cosh(0.5 * u - 0.2), 2)));
  }
  CHECK_FALSE(transform(registry_get("relu"), {}).homogeneous);
  CHECK(transform(registry_get("relu"), {2.0, 1.0, 1.0, 0.0}).kinks.at(0) == doctest::Approx(-0.5));
}

TEST_CASE("transform parameter validation") {
  const auto& t = registry_get("tanh");
  CHECK_THROWS_AS(transform(t, {0.0, 0.0, 1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(transform(t, {1.0, 0.0, -1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(transform(t, {1.0, NAN, 1.0, 0.0}), DomainError);
}

TEST_CASE("absorbing constants into neighbouring affine layers preserves the function") {
  const auto& base = registry_get("softplus");
  const TransformParams p{0.7, 0.3, 2.5, -0.4};
  const ActivationSpec hat = transform(base, p);

  AffineParams l1{Eigen::MatrixXd::Random(5, 4), Eigen::VectorXd::Random(5)};
  AffineParams l2{Eigen::MatrixXd::Random(3, 5), Eigen::VectorXd::Random(3)};
  const Eigen::VectorXd x = Eigen::VectorXd::Random(4);

  // phi_hat network
  Eigen::VectorXd h = (l1.weights * x + l1.bias).unaryExpr([&](double u) { return hat.phi(u); });
  const Eigen::VectorXd want = l2.weights * h + l2.bias;

  const AffineParams a1 = equivalent_parameters(p, l1, AbsorbSide::Input);
  const AffineParams a2 = equivalent_parameters(p, l2, AbsorbSide::Output);
  Eigen::VectorXd g = (a1.weights * x + a1.bias).unaryExpr([&](double u) { return base.phi(u); });
  const Eigen::VectorXd got = a2.weights * g + a2.bias;
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);

  AffineParams bad{Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(3)};
  CHECK_THROWS_AS(equivalent_parameters(p, bad, AbsorbSide::Input), ShapeError);
}
