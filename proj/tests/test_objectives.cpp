#include "polycd/objectives.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"

using namespace polycd;

TEST_CASE("coordinate restriction of a separable quadratic") {
  const BlockStructure blocks({1, 1});
  const ObjectiveModel f =
      QuadraticObjective{Matrix::Identity(2, 2), Vector::Zero(2)}.model(blocks);
  Vector x(2);
  x << 3.0, 7.0;
  const ObjectiveModel g = coordinate_restriction(f, 0, x);
  Vector mu(1);
  mu << 2.0;
  CHECK(g.value(mu) == doctest::Approx(0.5 * 4.0 + 24.5).epsilon(1e-14));
  CHECK(g.gradient(mu)[0] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("coordinate restriction picks up the coupling term") {
  Matrix Q(2, 2);
  Q << 2, 1, 1, 2;
  const ObjectiveModel f = QuadraticObjective{Q, Vector::Zero(2)}.model(BlockStructure({1, 1}));
  Vector x(2);
  x << 1.0, 0.0;
  const ObjectiveModel g = coordinate_restriction(f, 1, x);
  for (double mu : {-1.0, 0.0, 0.5, 2.0}) {
    Vector v(1);
    v << mu;
    // Hand oracle: g'(mu) = 1 + 2 mu (row product of Q with the composite point).
    CHECK(g.gradient(v)[0] == doctest::Approx(1.0 + 2.0 * mu).epsilon(1e-14));
  }
  CHECK(g.hessian(Vector::Zero(1))(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("restriction agrees with the full objective at the base point") {
  RngStream rng(17);
  const BlockStructure blocks({2, 3, 1});
  const Matrix Q = oracles::random_spd(6, rng);
  const ObjectiveModel f = QuadraticObjective{Q, rng.next_normal_vector(6)}.model(blocks);
  const Vector x = rng.next_normal_vector(6);
  for (int i = 0; i < blocks.n(); ++i) {
    const ObjectiveModel g = coordinate_restriction(f, i, x);
    const Vector xi = x.segment(blocks.offset(i), blocks.dim(i));
    CHECK(g.value(xi) == doctest::Approx(f.value(x)).epsilon(1e-14));
  }
}

TEST_CASE("quadratic restriction hessian equals the diagonal block exactly") {
  RngStream rng(19);
  const BlockStructure blocks({2, 2});
  const Matrix Q = oracles::random_spd(4, rng);
  const ObjectiveModel f = QuadraticObjective{Q, Vector::Zero(4)}.model(blocks);
  const Vector x = rng.next_normal_vector(4);
  for (int i = 0; i < 2; ++i) {
    const ObjectiveModel g = coordinate_restriction(f, i, x);
    const Matrix Hi = g.hessian(x.segment(blocks.offset(i), 2));
    CHECK((Hi - Q.block(blocks.offset(i), blocks.offset(i), 2, 2)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("finite difference audit on the quadratic family") {
  RngStream rng(29);
  const Matrix Q = oracles::random_spd(3, rng);
  const ObjectiveModel f =
      QuadraticObjective{Q, rng.next_normal_vector(3)}.model(BlockStructure::single(3));
  const auto report = finite_diff_audit(f, Vector::Zero(3), 20, 1e-5);
  CHECK(report.max_gradient_rel_error <= 1e-7);
  REQUIRE(report.max_hessian_rel_error.has_value());
  CHECK(*report.max_hessian_rel_error <= 1e-6);
}

TEST_CASE("finite difference audit on a registry objective") {
  const ObjectiveModel f = registry_objective("exp_plus_square", BlockStructure({1, 1}));
  const auto report = finite_diff_audit(f, Vector::Zero(2), 30, 1e-5);
  CHECK(report.max_gradient_rel_error <= 1e-5);
  CHECK(*report.max_hessian_rel_error <= 1e-4);
}

TEST_CASE("finite difference audit of the zero function") {
  ObjectiveModel f;
  f.blocks = BlockStructure::single(2);
  f.value = [](const Vector&) { return 0.0; };
  f.gradient = [](const Vector& x) -> Vector { return Vector::Zero(x.size()); };
  f.lipschitz_blocks = {Matrix::Identity(2, 2)};
  const auto report = finite_diff_audit(f, Vector::Zero(2), 5, 1e-5);
  CHECK(report.max_gradient_rel_error == 0.0);
  CHECK_FALSE(report.max_hessian_rel_error.has_value());
  CHECK_THROWS_AS(finite_diff_audit(f, Vector::Zero(2), 5, 0.0), std::invalid_argument);
}

TEST_CASE("descent inequality holds for block-supported perturbations") {
  // The per-block constants L_i bound curvature along single-block moves;
  // that is the form the block update analysis uses.
  RngStream rng(37);
  for (int inst = 0; inst < 8; ++inst) {
    const BlockStructure blocks({2, 1, 2});
    const Matrix Q = oracles::random_spd(5, rng);
    const ObjectiveModel f = QuadraticObjective{Q, rng.next_normal_vector(5)}.model(blocks);
    const Matrix L = f.lipschitz_full();
    for (int s = 0; s < 50; ++s) {
      const Vector x = rng.next_normal_vector(5);
      const int i = static_cast<int>(rng.next_u64() % 3);
      Vector y = x;
      y.segment(blocks.offset(i), blocks.dim(i)) += rng.next_normal_vector(blocks.dim(i));
      const double lhs = f.gradient(x).dot(y - x);
      const double rhs = f.value(y) - f.value(x) - 0.5 * (y - x).dot(L * (y - x));
      CHECK(lhs >= rhs - 1e-8);
    }
  }
}

TEST_CASE("strong convexity inequality on sampled pairs") {
  RngStream rng(43);
  const Matrix Q = oracles::random_spd(4, rng);
  const ObjectiveModel f = QuadraticObjective{Q, Vector::Zero(4)}.model(BlockStructure::single(4));
  REQUIRE(f.strong_convexity.has_value());
  const Matrix U = *f.strong_convexity;
  for (int s = 0; s < 50; ++s) {
    const Vector x = rng.next_normal_vector(4);
    const Vector y = rng.next_normal_vector(4);
    const double lhs = (f.gradient(x) - f.gradient(y)).dot(x - y);
    CHECK(lhs >= (x - y).dot(U * (x - y)) - 1e-8);
  }
}

TEST_CASE("gradient and hessian callbacks match finite differences") {
  for (const char* name : {"exp_plus_square", "exp_tridiag"}) {
    const int m = std::string(name) == "exp_plus_square" ? 2 : 4;
    const ObjectiveModel f =
        registry_objective(name, BlockStructure(std::vector<int>(m, 1)));
    RngStream rng(53);
    for (int s = 0; s < 10; ++s) {
      const Vector x = rng.next_normal_vector(m);
      const Vector fd = oracles::fd_gradient(f.value, x);
      CHECK((fd - f.gradient(x)).norm() / std::max(1.0, f.gradient(x).norm()) <= 1e-5);
    }
  }
}

TEST_CASE("unknown registry name is rejected") {
  CHECK_THROWS_AS(registry_objective("nope", BlockStructure::single(2)), std::invalid_argument);
}
