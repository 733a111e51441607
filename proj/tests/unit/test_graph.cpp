#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dks/errors.hpp"
#include "dks/graph.hpp"
#include "dks/solver.hpp"
#include "oracle.hpp"

using namespace dks;

namespace {

bool has_rule(const NetworkGraph& g, const std::string& rule) {
  const auto vs = validate(g);
  return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) { return v.rule == rule; });
}

double resnet_poly(int D, double w, double psi) {
  const double w2 = w * w;
  return std::pow(w2 * psi * psi * psi + 1 - w2, (D - 14) / 3.0) * std::pow(w2 * psi * psi + 1 - w2, 4) *
         std::pow(psi, 5);
}

}  // namespace

TEST_CASE("templates validate cleanly") {
  CHECK(validate(mlp(5)).empty());
  CHECK(validate(resnet_v2_modified(50, 0.3)).empty());
  CHECK(validate(resnet_v2_modified(101, 1.0)).empty());
  CHECK(validate(skip_free(50)).empty());
  CHECK(validate(wide_resnet(28, 2, 0.5)).empty());
  CHECK(validate(resnet_v2_layernorm(50, true)).empty());
  CHECK(validate(skip_chain(4, true)).empty());
}

TEST_CASE("validation rules") {
  {
    GraphBuilder b;
    const auto x = b.input(3);
    const auto h = b.nonlinear(b.affine(x, 4), "tanh");
    const auto bad = b.nonlinear(h, "tanh");  // two nonlinear layers back to back
    CHECK(has_rule(std::move(b).finish(bad), "combined-layer"));
  }
  {
    GraphBuilder b;
    const auto x = b.input(3);
    const auto s = b.norm_sum({b.affine(x, 4), b.affine(x, 4)}, {0.5, 0.5});
    CHECK(has_rule(std::move(b).finish(s), "unnormalized-sum"));
  }
  {
    GraphBuilder b;
    const auto x = b.input(3);
    const auto s = b.norm_sum({b.affine(x, 4), b.affine(x, 4)}, {1.0});
    CHECK(has_rule(std::move(b).finish(s), "weight-count"));
  }
  {
    GraphBuilder b;
    const auto x = b.input(3);
    CHECK(has_rule(std::move(b).finish(b.affine(x, 4, 2, 3)), "even-filter"));
  }
  {
    GraphBuilder b;
    const auto x = b.input(3);
    const auto s = b.norm_sum({b.affine(x, 4), b.affine(x, 5)}, {std::sqrt(0.5), std::sqrt(0.5)});
    CHECK(has_rule(std::move(b).finish(s), "channel-mismatch"));
  }
  NetworkGraph g = mlp(2);
  g.nodes[2].parents = {"nowhere"};
  CHECK(has_rule(g, "unknown-parent"));
  g = mlp(2);
  g.nodes[1].parents = {g.nodes[3].id};
  CHECK(has_rule(g, "cycle"));
  g = mlp(2);
  g.nodes.push_back(g.nodes[1]);
  CHECK(has_rule(g, "duplicate-id"));
  g = mlp(2);
  g.output = "n99";
  CHECK_FALSE(validate(g).empty());
}

TEST_CASE("mean pooling gives a warning") {
  GraphBuilder b;
  const auto x = b.input(3);
  const auto p = b.pool(b.affine(x, 4), PoolKind::Mean);
  CHECK(warnings(std::move(b).finish(p)).size() == 1);
}

TEST_CASE("json round trip") {
  const NetworkGraph g = resnet_v2_modified(50, 0.4);
  const NetworkGraph h = graph_from_json(graph_to_json(g));
  CHECK(graph_to_json(h) == graph_to_json(g));
  CHECK(slope_poly(h).eval(1.07) == doctest::Approx(slope_poly(g).eval(1.07)).epsilon(1e-14));
}

TEST_CASE("strict json") {
  CHECK_THROWS_AS(graph_from_json("{"), GraphError);
  CHECK_THROWS_AS(graph_from_json(R"({"nodes": [], "output": "a", "extra": 1})"), GraphError);
  CHECK_THROWS_AS(graph_from_json(R"({"nodes": [{"id": "a", "kind": "input", "params": {"channels": 3, "x": 1}}],
                                      "output": "a"})"),
                  GraphError);
  CHECK_THROWS_AS(graph_from_json(R"({"nodes": [{"id": "a", "kind": "conv"}], "output": "a"})"), GraphError);
  const NetworkGraph g = graph_from_json(R"({"nodes": [
      {"id": "x", "kind": "input", "params": {"channels": 3}},
      {"id": "a", "kind": "affine", "params": {"out_channels": 8, "filter_h": 3, "filter_w": 3}, "parents": ["x"]},
      {"id": "h", "kind": "nonlinear", "params": {"activation": "tanh"}, "parents": ["a"]}],
      "output": "h"})");
  CHECK(validate(g).empty());
  CHECK(slope_poly(g).to_string() == "psi");
}

TEST_CASE("qc propagation through a sequential network matches local maps") {
  const NetworkGraph g = mlp(3, "tanh");
  const auto& t = registry_get("tanh");
  const Propagation p = qc_propagate(g, {}, {1.0, 0.3});
  const auto seq = iterate_sequential(t, 3, {1.0, 0.3});
  CHECK(p.states.at(g.output).q == doctest::Approx(seq.back().q).epsilon(1e-12));
  CHECK(p.states.at(g.output).c == doctest::Approx(seq.back().c).epsilon(1e-12));
}

TEST_CASE("normalized sum and concatenation rules") {
  const double w = 0.6;
  const double qh = 0.5, ch = oracle::relu_cmap(0.2);
  for (bool use_concat : {false, true}) {
    GraphBuilder b;
    const auto x = b.input(4);
    const auto a1 = b.affine(x, 4);
    const auto h = b.nonlinear(b.affine(x, 4), "relu");
    const auto out = use_concat ? b.concat({a1, h}) : b.norm_sum({a1, h}, {w, std::sqrt(1 - w * w)});
    const NetworkGraph g = std::move(b).finish(out);
    const QCState st = qc_propagate(g, {}, {1.0, 0.2}).states.at(out);
    if (use_concat) {
      CHECK(st.q == doctest::Approx(0.5 * (1 + qh)).epsilon(1e-12));
      CHECK(st.c == doctest::Approx((0.2 + qh * ch) / (1 + qh)).epsilon(1e-8));
    } else {
      const double q = w * w + (1 - w * w) * qh;
      CHECK(st.q == doctest::Approx(q).epsilon(1e-12));
      CHECK(st.c == doctest::Approx((w * w * 0.2 + (1 - w * w) * qh * ch) / q).epsilon(1e-8));
    }
  }
}

TEST_CASE("relu then layer norm") {
  GraphBuilder b;
  const auto x = b.input(4);
  const auto ln = b.layer_norm(b.nonlinear(b.affine(x, 4), "relu"));
  const NetworkGraph g = std::move(b).finish(ln);
  const double m2 = 1.0 / (2.0 * std::numbers::pi), q = 0.5;
  for (double c : {-0.5, 0.0, 0.7}) {
    const Propagation p = qc_propagate(g, {}, {1.0, c});
    CHECK(p.states.at(ln).q == doctest::Approx(1.0));
    CHECK(p.states.at(ln).c == doctest::Approx((q * oracle::relu_cmap(c) - m2) / (q - m2)).epsilon(1e-8));
  }
}

TEST_CASE("modified resnet slope polynomial") {
  for (int D : {50, 101, 152})
    for (double w : {0.0, 1 / std::sqrt(2.0), 1.0}) {
      const MaxSlopeFn mu = maximal_slope(resnet_v2_modified(D, w));
      CHECK(mu.candidates().size() == 1);
      for (double psi : {1.0, 1.01, 1.1}) {
        const double want = resnet_poly(D, w, psi);
        CHECK(std::abs(mu(psi) - want) <= 1e-12 * want);
      }
    }
}

TEST_CASE("skip connection over a deep chain") {
  const int D = 10;
  const MaxSlopeFn a = maximal_slope(skip_chain(D, false));
  const MaxSlopeFn b = maximal_slope(skip_chain(D, true));
  for (double psi : {1.0, 1.05, 1.3}) {
    const double pd = std::pow(psi, D);
    CHECK(a(psi) == doctest::Approx(pd).epsilon(1e-14));
    CHECK(b(psi) == doctest::Approx(std::max(pd, psi * (1 + pd) / 2)).epsilon(1e-14));
  }
  // the second form is not reducible: each candidate wins somewhere
  CHECK(b(1.3) == doctest::Approx(std::pow(1.3, D)).epsilon(1e-14));
  CHECK(b(3.0) == doctest::Approx(3.0 * (1 + std::pow(3.0, D)) / 2).epsilon(1e-14));
  CHECK(b(3.0) > std::pow(3.0, D));
}

TEST_CASE("slope inversion") {
  const MaxSlopeFn chain = maximal_slope(skip_free(50));
  CHECK(chain.invert(1.5) == std::pow(1.5, 1.0 / 49));
  const MaxSlopeFn mu = maximal_slope(wide_resnet(250, 1, std::sqrt(0.05)));
  const double psi = mu.invert(1.5);
  CHECK(psi > 1.0);
  CHECK(std::abs(mu(psi) - 1.5) <= 1e-6);
  CHECK_THROWS_AS(mu.invert(0.9), DomainError);
  GraphBuilder b;
  const auto x = b.input(2);
  const NetworkGraph linear = std::move(b).finish(b.affine(x, 2));
  CHECK_THROWS_AS(maximal_slope(linear).invert(1.5), GraphError);
}

TEST_CASE("slope polynomial value at psi = 1 is 1 for normalized architectures") {
  for (const NetworkGraph& g : {resnet_v2_modified(50, 0.3), wide_resnet(40, 2, 0.8), skip_chain(6, true)})
    CHECK(slope_poly(g).eval(1.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("slope polynomial predicts the extended C'(1)") {
  // Property: with per-layer DKS activations of slope psi and Q(1) = 1,
  // C'_f(1) of the whole network equals p_f(psi).
  const NetworkGraph g = resnet_v2_modified(50, 0.5, "softplus");
  const double psi = 1.02;
  const auto& sp = registry_get("softplus");
  ActivationTable tab{{"softplus", transform(sp, solve_transform(sp, psi).params)}};
  const double h = 1e-4;
  const double c1 = qc_propagate(g, tab, {1.0, 1.0 - h}).states.at(g.output).c;
  const double slope = (1.0 - c1) / h;
  CHECK(slope == doctest::Approx(slope_poly(g).eval(psi)).epsilon(2e-3));
}

TEST_CASE("non series-parallel graphs are rejected") {
  GraphBuilder b;
  const auto x = b.input(2);
  const auto a = b.affine(x, 2);
  const auto c = b.affine(x, 2);
  const double r = std::sqrt(0.5);
  const auto s1 = b.norm_sum({a, c}, {r, r});
  const auto s2 = b.norm_sum({b.nonlinear(b.affine(a, 2), "tanh"), s1}, {r, r});
  const NetworkGraph g = std::move(b).finish(s2);
  CHECK_THROWS_AS(maximal_slope(g), GraphError);
}
