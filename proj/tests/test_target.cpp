#include <doctest.h>

#include <cmath>

#include "flowlab/target.hpp"

using namespace flowlab;

namespace {

MixtureTarget binary_target(double rho, int d) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, 2);
  c(0, 0) = std::sqrt(rho);
  c(0, 1) = -std::sqrt(rho);
  Eigen::VectorXd pi(2);
  pi << 0.5, 0.5;
  return isotropic_mixture(pi, c, Eigen::MatrixXd::Identity(d, 1));
}

}  // namespace

TEST_CASE("isotropic binary mixture abstract fields") {
  const double rho = 2.0;
  MixtureTarget t = binary_target(rho, 50);
  REQUIRE(t.n_clusters() == 2);
  CHECK(t.centroid_gram(0, 0) == doctest::Approx(rho));
  CHECK(t.centroid_gram(0, 1) == doctest::Approx(-rho));
  CHECK(t.reference_overlaps(0, 0) == doctest::Approx(std::sqrt(rho)));
  CHECK(t.reference_overlaps(1, 0) == doctest::Approx(-std::sqrt(rho)));
  REQUIRE(t.atoms.size() == 1);
  CHECK(t.atoms[0].weight == doctest::Approx(1.0));
  CHECK(t.atoms[0].eigenvalues(0) == doctest::Approx(1.0));
  CHECK(average_eigenvalue(t) == doctest::Approx(1.0));
  CHECK(validate_target(t).ok);
}

TEST_CASE("embedding bucketing groups equal eigenvalue profiles") {
  Embedding emb;
  emb.d = 6;
  emb.centroids = Eigen::MatrixXd::Zero(6, 1);
  emb.eigenvalues.resize(6, 1);
  emb.eigenvalues << 3.0, 3.0, 1.0, 1.0, 1.0, 0.5;
  emb.reference = Eigen::MatrixXd::Identity(6, 2);
  MixtureTarget t = target_from_embedding(Eigen::VectorXd::Ones(1), emb);
  REQUIRE(t.atoms.size() == 3);
  double wsum = 0;
  for (const auto& a : t.atoms) wsum += a.weight;
  CHECK(wsum == doctest::Approx(1.0));
  CHECK(average_eigenvalue(t) == doctest::Approx((2 * 3.0 + 3 * 1.0 + 0.5) / 6));
  REQUIRE(t.embedding.has_value());
  CHECK(t.embedding->atom_of_coord[0] == t.embedding->atom_of_coord[1]);
  CHECK(t.embedding->atom_of_coord[2] != t.embedding->atom_of_coord[0]);
}

TEST_CASE("heavy spectrum target layout") {
  MixtureTarget t = heavy_spectrum_target({{6.0, 1}, {1.0, 4}, {0.1, 5}}, 2);
  CHECK(t.n_clusters() == 1);
  CHECK(t.reference_dim == 2);
  CHECK(t.embedding->d == 10);
  CHECK(average_eigenvalue(t) == doctest::Approx((6.0 + 4.0 + 0.5) / 10));
  CHECK(t.centroid_gram(0, 0) == doctest::Approx(0.0));
  CHECK(validate_target(t).ok);
}

TEST_CASE("sampling matches target moments") {
  const int d = 40;
  MixtureTarget t = binary_target(1.0, d);
  const int n = 20000;
  Eigen::MatrixXd x = sample_target(t, n, 77);
  REQUIRE(x.rows() == n);
  REQUIRE(x.cols() == d);
  // Symmetric mixture: mean ~ 0; coordinate 0 variance = 1 + rho.
  CHECK(std::abs(x.col(0).mean()) < 0.05);
  const double v0 = (x.col(0).array() - x.col(0).mean()).square().mean();
  CHECK(v0 == doctest::Approx(2.0).epsilon(0.05));
  const double v1 = (x.col(1).array() - x.col(1).mean()).square().mean();
  CHECK(v1 == doctest::Approx(1.0).epsilon(0.05));
  // Determinism.
  Eigen::MatrixXd y = sample_target(t, 10, 77);
  CHECK((y - x.topRows(10)).norm() == doctest::Approx(0.0));
}

TEST_CASE("covariance target recovers a planted spectrum") {
  // Rows ~ N(0, diag(4, 1, ..., 1)) up to sampling noise.
  const int d = 8, n = 60000;
  MixtureTarget base = heavy_spectrum_target({{4.0, 1}, {1.0, d - 1}}, 1);
  Eigen::MatrixXd x = sample_target(base, n, 5);
  MixtureTarget t = covariance_target_from_data(x, 1.0, 2);
  REQUIRE(t.embedding.has_value());
  CHECK(t.embedding->eigenvalues(0, 0) == doctest::Approx(4.0).epsilon(0.1));
  CHECK(t.embedding->eigenvalues(4, 0) == doctest::Approx(1.0).epsilon(0.1));
  CHECK(validate_target(t).ok);
}

TEST_CASE("validation flags inconsistent weights") {
  MixtureTarget t = binary_target(1.0, 10);
  t.pi(0) = 0.9;  // no longer sums to one
  CHECK_FALSE(validate_target(t).ok);
}
