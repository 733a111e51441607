#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dks/errors.hpp"
#include "dks/localmaps.hpp"
#include "dks/solver.hpp"

using namespace dks;

TEST_CASE("eliminate: identity activation") {
  const Eliminated e = eliminate(registry_get("identity"), 2.0, 3.0);
  CHECK(e.delta == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(e.gamma == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("eliminate: relu half-normal moments") {
  const Eliminated e = eliminate(registry_get("relu"), 1.0, 0.0);
  const double mean = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  CHECK(e.delta == doctest::Approx(-mean).epsilon(1e-12));
  CHECK(e.gamma == doctest::Approx(1.0 / std::sqrt(0.5 - mean * mean)).epsilon(1e-12));
}

TEST_CASE("eliminate rejects constant activations") {
  // relu far below its kink is identically zero on the truncated support
  CHECK_THROWS_AS(eliminate(registry_get("relu"), 1.0, -20.0), DegenerateActivationError);
}

namespace {

void check_conditions(const ActivationSpec& base, const SolveResult& r, double psi, double target = 1.0) {
  const ActivationSpec hat = transform(base, r.params);
  const MapStats st = map_stats(hat);
  CHECK(std::abs(st.q1 - 1.0) < 1e-7);
  CHECK(std::abs(st.c0) < 1e-7);
  CHECK(std::abs(st.dc1 - psi) < 1e-7);
  if (!r.homogeneous) CHECK(std::abs(st.dq1 - target) < 1e-7);
}

}  // namespace

TEST_CASE("solve_transform satisfies the four conditions") {
  const double psi = std::pow(1.5, 0.01);
  for (const char* n : {"tanh", "softplus", "swish", "erf", "sigmoid"}) {
    CAPTURE(n);
    const auto& s = registry_get(n);
    const SolveResult r = solve_transform(s, psi);
    CHECK(r.params.alpha > 0.0);
    check_conditions(s, r, psi);
  }
}

TEST_CASE("solve_transform with a different Q'(1) target") {
  const double psi = std::pow(1.5, 0.01);
  SolveOptions o;
  o.q_slope_target = 1.01;
  const auto& s = registry_get("softplus");
  check_conditions(s, solve_transform(s, psi, o), psi, 1.01);
}

TEST_CASE("homogeneous activations keep alpha = 1") {
  const double psi = 1.05;
  const auto& s = registry_get("relu");
  const SolveResult r = solve_transform(s, psi);
  CHECK(r.homogeneous);
  CHECK(r.params.alpha == 1.0);
  check_conditions(s, r, psi);
}

TEST_CASE("identity admits no root for psi > 1") {
  SolveOptions o;
  o.max_restarts = 8;
  try {
    solve_transform(registry_get("identity"), 1.1, o);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.history().size() == 8);
  }
}

TEST_CASE("solver input validation") {
  const auto& s = registry_get("tanh");
  CHECK_THROWS_AS(solve_transform(s, 0.9), DomainError);
  CHECK_THROWS_AS(solve_transform(s, NAN), DomainError);
  SolveOptions o;
  o.max_restarts = 0;
  CHECK_THROWS_AS(solve_transform(s, 1.1, o), DomainError);
}

TEST_CASE("solve_transform is deterministic in the seed") {
  SolveOptions o;
  o.seed = 7;
  const auto& s = registry_get("selu");
  const SolveResult a = solve_transform(s, 1.02, o);
  const SolveResult b = solve_transform(s, 1.02, o);
  CHECK(a.params.alpha == b.params.alpha);
  CHECK(a.params.beta == b.params.beta);
  CHECK(a.history.size() == b.history.size());
}
