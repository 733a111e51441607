#include <doctest.h>

#include "dks/errors.hpp"
#include "dks/pln.hpp"
#include "dks/rng.hpp"

using namespace dks;

namespace {

FeatureMap random_map(int k, int l, std::uint64_t seed) {
  Rng r(seed);
  FeatureMap x(k, l);
  for (int j = 0; j < l; ++j)
    for (int i = 0; i < k; ++i) x(i, j) = r.normal() * (1.0 + j);
  return x;
}

}  // namespace

TEST_CASE("pln output has unit q per location") {
  for (int k : {1, 3, 16}) {
    const FeatureMap x = random_map(k, 7, k);
    const FeatureMap y = pln(x);
    REQUIRE(y.rows() == k + 1);
    REQUIRE(y.cols() == 7);
    for (int j = 0; j < 7; ++j) CHECK(std::abs(y.col(j).squaredNorm() / (k + 1) - 1.0) < 1e-10);
  }
}

TEST_CASE("pln is scale invariant") {
  const FeatureMap x = random_map(5, 9, 3);
  for (double s : {1e-8, 0.3, 7.0, 1e9})
    CHECK((pln(s * x) - pln(x)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("zero locations are handled") {
  FeatureMap x = random_map(4, 3, 4);
  x.col(1).setZero();
  const FeatureMap y = pln(x);
  CHECK(std::abs(y.col(1).squaredNorm() / 5 - 1.0) < 1e-10);
  CHECK_THROWS_AS(pln(FeatureMap::Zero(3, 2)), DomainError);
}

TEST_CASE("constant variant round trip") {
  const FeatureMap x = random_map(6, 5, 9);
  for (double c : {1.0, 0.25, -2.0}) {
    const FeatureMap y = pln_const(x, c);
    for (int j = 0; j < 5; ++j) CHECK(std::abs(y.col(j).squaredNorm() / 7 - 1.0) < 1e-10);
    CHECK((pln_const_inverse(y, c) - x).cwiseAbs().maxCoeff() < 1e-10 * x.cwiseAbs().maxCoeff());
  }
  CHECK_THROWS_AS(pln_const(x, 0.0), DomainError);
}

TEST_CASE("feature csv round trip") {
  const FeatureMap x = random_map(3, 4, 1);
  const FeatureMap y = read_feature_csv(write_feature_csv(x));
  CHECK((x - y).cwiseAbs().maxCoeff() < 1e-8 * x.cwiseAbs().maxCoeff());
  CHECK_THROWS_AS(read_feature_csv("1,2\n3\n"), ShapeError);
}
