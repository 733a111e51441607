#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dks/errors.hpp"
#include "dks/localmaps.hpp"
#include "oracle.hpp"

using namespace dks;

TEST_CASE("relu C map matches the arc-cosine kernel") {
  const auto& relu = registry_get("relu");
  for (int i = 0; i <= 40; ++i) {
    const double c = -1.0 + i / 20.0;
    CHECK(std::abs(local_c(relu, c, 1.0, 1.0) - oracle::relu_cmap(c)) < 1e-6);
  }
  // positive homogeneity: the C map does not depend on q
  CHECK(local_c(relu, 0.3, 4.0, 0.25) == doctest::Approx(oracle::relu_cmap(0.3)).epsilon(1e-9));
  CHECK(local_q(relu, 3.0) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("erf Q and C maps match their closed forms") {
  const auto& erf = registry_get("erf");
  for (double q : {0.5, 1.0, 2.0}) {
    CHECK(std::abs(local_q(erf, q) - oracle::erf_qmap(q)) < 1e-10);
    for (double c : {-0.9, 0.0, 0.5}) CHECK(std::abs(local_c(erf, c, q, q) - oracle::erf_cmap(c, q)) < 1e-8);
  }
}

TEST_CASE("Q map derivative") {
  for (const char* n : {"tanh", "softplus", "swish", "relu"}) {
    const auto& s = registry_get(n);
    const double h = 1e-5;
    const double fd = (local_q(s, 1.0 + h) - local_q(s, 1.0 - h)) / (2 * h);
    CAPTURE(n);
    CHECK(local_q_deriv(s, 1.0) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("C map derivatives") {
  const auto& tanh = registry_get("tanh");
  for (double c : {-0.5, 0.1, 0.8}) {
    const double h = 1e-5;
    const double fd = (local_c(tanh, c + h, 1.0, 1.0) - local_c(tanh, c - h, 1.0, 1.0)) / (2 * h);
    CHECK(local_c_deriv(tanh, c, 1.0, 1) == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK(std::abs(local_c_deriv(registry_get("relu"), 1.0, 1.0, 1) - 1.0) < 1e-4);
}

TEST_CASE("C map fixes 1 and C'(1) matches an independent integral") {
  for (const char* n : {"tanh", "softplus", "selu", "swish"}) {
    const auto& s = registry_get(n);
    CAPTURE(n);
    CHECK(local_c(s, 1.0, 1.0, 1.0) == doctest::Approx(1.0));
    const double d2 = oracle::expect([&](double x) { return s.dphi(x) * s.dphi(x); });
    const double q2 = oracle::expect([&](double x) { return s.phi(x) * s.phi(x); });
    CHECK(local_c_deriv(s, 1.0, 1.0, 1) == doctest::Approx(d2 / q2).epsilon(1e-9));
  }
}

TEST_CASE("odd activations have C(0) = 0") {
  for (const char* n : {"tanh", "erf", "softsign"}) CHECK(std::abs(cmap_zero(registry_get(n))) < 1e-12);
}

TEST_CASE("domain errors") {
  const auto& t = registry_get("tanh");
  CHECK_THROWS_AS(local_q(t, 0.0), DomainError);
  CHECK_THROWS_AS(local_q(t, -1.0), DomainError);
  CHECK_THROWS_AS(local_c(t, 1.5, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(iterate_sequential(t, -1, {}), DomainError);
}

TEST_CASE("relu depth degeneration") {
  const auto& relu = registry_get("relu");
  for (int i = 0; i <= 40; ++i) {
    const double c = -1.0 + i / 20.0;
    const double out = iterate_sequential(relu, 100, {1.0, c}).back().c;
    CHECK(out >= 0.996);
    CHECK(out <= 1.0);
  }
}

TEST_CASE("deviation bounds hold for tanh and softplus maps") {
  for (const char* n : {"tanh", "softplus", "erf"}) {
    const auto& s = registry_get(n);
    const MapStats st = map_stats(s);
    const DeviationBounds b = deviation_bounds(st);
    const Deviation d = measure_deviation([&](double c) { return local_c(s, c, 1.0, 1.0); }, {}, 81);
    CAPTURE(n);
    CHECK(d.max_value >= b.lower - 1e-9);
    CHECK(d.max_value <= b.upper_value + 1e-9);
  }
}

TEST_CASE("nonlinearity measures") {
  CHECK(std::abs(nonlinearity(registry_get("identity"))) < 1e-9);
  CHECK(std::abs(nonaffineness(registry_get("identity"))) < 1e-9);
  CHECK(nonlinearity(registry_get("tanh")) > 0.0);
  CHECK(nonlinearity(registry_get("tanh")) < 1.0);
}
