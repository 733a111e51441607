#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dks/errors.hpp"
#include "dks/graph.hpp"
#include "dks/init.hpp"
#include "dks/rng.hpp"
#include "dks/tensor_io.hpp"

using namespace dks;

TEST_CASE("rng is reproducible and streams differ") {
  Rng a(42), b(42), c(derive_seed(42, 1));
  for (int i = 0; i < 100; ++i) CHECK(a.bits() == b.bits());
  CHECK(Rng(42).bits() != c.bits());
  Rng u(3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("normal draws have unit variance") {
  Rng r(11);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.01);
}

TEST_CASE("SUO invariants") {
  for (auto [m, k] : std::vector<std::pair<int, int>>{{4, 4}, {3, 8}, {8, 3}, {64, 64}, {1, 5}, {5, 1}}) {
    CAPTURE(m);
    CAPTURE(k);
    const Eigen::MatrixXd W = sample_suo(m, k, 99);
    REQUIRE(W.rows() == m);
    REQUIRE(W.cols() == k);
    if (m <= k) {
      CHECK((W * W.transpose() - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-10);
    } else {
      const Eigen::MatrixXd want = double(m) / k * Eigen::MatrixXd::Identity(k, k);
      CHECK((W.transpose() * W - want).cwiseAbs().maxCoeff() < 1e-10);
      // dimension-normalized squared norm is preserved
      Rng r(5);
      Eigen::VectorXd x(k);
      for (int i = 0; i < k; ++i) x[i] = r.normal();
      CHECK((W * x).squaredNorm() / m == doctest::Approx(x.squaredNorm() / k).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(sample_suo(0, 3, 1), DomainError);
}

TEST_CASE("gaussian sampler scale") {
  Rng r(8);
  const Eigen::MatrixXd W = sample_gaussian(400, 100, r);
  CHECK(W.squaredNorm() / (400.0 * 100.0) == doctest::Approx(0.01).epsilon(0.02));
}

TEST_CASE("delta filters are zero off-centre") {
  const FilterShape s{3, 5, 4, 6};
  for (const FilterBank& f : {orthogonal_delta(s, 1), gaussian_delta(s, 1)}) {
    REQUIRE(f.data.size() == 3u * 5 * 4 * 6);
    for (int h = 0; h < 3; ++h)
      for (int w = 0; w < 5; ++w)
        if (h != 1 || w != 2) CHECK(f.slice(h, w).cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.central().rows() == 6);
    CHECK(f.central().cols() == 4);
  }
  const Eigen::MatrixXd c = orthogonal_delta(s, 1).central();
  CHECK((c.transpose() * c - 1.5 * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(orthogonal_delta({2, 3, 4, 4}, 1), ShapeError);
}

TEST_CASE("tensor container round trip is bit exact") {
  const NetworkGraph g = mlp(3, "tanh", 8);
  const auto ts = initialize_graph(g, DeltaScheme::Orthogonal, 17);
  REQUIRE(ts.size() == 8);  // 4 affine layers
  const auto path = (std::filesystem::temp_directory_path() / "dks_init_roundtrip.bin").string();
  write_tensors(path, ts);
  const auto back = read_tensors(path);
  REQUIRE(back.size() == ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    CHECK(back[i].name == ts[i].name);
    CHECK(back[i].shape == ts[i].shape);
    CHECK(std::memcmp(back[i].data.data(), ts[i].data.data(), ts[i].data.size() * sizeof(double)) == 0);
  }
  // truncated file
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS_AS(read_tensors(path), ShapeError);
  std::filesystem::remove(path);
}

TEST_CASE("graph initialization is deterministic and seed dependent") {
  const NetworkGraph g = resnet_v2_modified(50, 0.5);
  const auto a = initialize_graph(g, DeltaScheme::Gaussian, 1);
  const auto b = initialize_graph(g, DeltaScheme::Gaussian, 1);
  const auto c = initialize_graph(g, DeltaScheme::Gaussian, 2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].data == b[i].data);
  CHECK(a[0].data != c[0].data);
  for (const Tensor& t : a)
    if (t.name.ends_with(".weight")) CHECK(t.shape.size() == 4);
}
