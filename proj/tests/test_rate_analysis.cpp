#include "polycd/rate_analysis.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"

using namespace polycd;

namespace {

Matrix coupled2() {
  Matrix Q(2, 2);
  Q << 2, 1, 1, 2;
  return Q;
}

ReducedBasis identity_basis(const BlockStructure& blocks) {
  return reduced_basis(Polyhedron::unconstrained(blocks), ActiveSet{});
}

ScalingMatrix block_diag_scaling(const std::vector<Matrix>& blocks_g,
                                 const BlockStructure& blocks) {
  ScalingMatrix s;
  s.gamma = Matrix::Zero(blocks.total(), blocks.total());
  for (int i = 0; i < blocks.n(); ++i)
    s.gamma.block(blocks.offset(i), blocks.offset(i), blocks.dim(i), blocks.dim(i)) =
        blocks_g[i];
  s.block_diagonal = true;
  s.blocks = blocks;
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.gamma);
  s.eig_lower = es.eigenvalues().minCoeff();
  s.eig_upper = es.eigenvalues().maxCoeff();
  return s;
}

ReducedModel newton_model(const Matrix& H, const BlockStructure& blocks) {
  return reduce(H, ScalingMatrix::newton_block(H, blocks), identity_basis(blocks));
}

// Stieltjes-type SPD matrix with scalar blocks: nonpositive off-diagonals,
// strictly dominant diagonal, nonzero coupling.
Matrix random_stieltjes(int m, RngStream& rng, bool tridiagonal = false) {
  Matrix H = Matrix::Zero(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = r + 1; c < m; ++c) {
      if (tridiagonal && c != r + 1) continue;
      const double v = rng.next_uniform(0.1, 1.0);
      H(r, c) = -v;
      H(c, r) = -v;
    }
  for (int r = 0; r < m; ++r) {
    double off = -H.row(r).sum() + H(r, r);
    H(r, r) = off * rng.next_uniform(1.05, 1.5) + 0.1;
  }
  return H;
}

}  // namespace

TEST_CASE("spectral radius of hand matrices") {
  Matrix M(2, 2);
  M << 0, -0.5, 0, 0.25;
  CHECK(spectral_radius(M) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(spectral_radius(Matrix::Identity(3, 3)) == doctest::Approx(1.0).epsilon(1e-12));
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;  // complex pair +-i
  CHECK(spectral_radius(rot) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spectral_radius(Matrix::Zero(0, 0)) == 0.0);
}

TEST_CASE("spectral radius input validation") {
  CHECK_THROWS_AS(spectral_radius(Matrix::Zero(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(spectral_radius(Matrix::Zero(513, 513)), std::invalid_argument);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(spectral_radius(bad), std::invalid_argument);
}

TEST_CASE("spectral radius agrees with the Gelfand estimate on normal matrices") {
  RngStream rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + 2 * static_cast<int>(rng.next_u64() % 4);
    // Orthogonal similarity of rotation/diagonal blocks: nonsymmetric with
    // known conditioning, so the k = 256 estimate is within budget.
    Matrix D = Matrix::Zero(m, m);
    for (int i = 0; i + 1 < m; i += 2) {
      const double r = rng.next_uniform(0.2, 0.9);
      const double th = rng.next_uniform(0.1, 3.0);
      D(i, i) = r * std::cos(th);
      D(i, i + 1) = r * std::sin(th);
      D(i + 1, i) = -r * std::sin(th);
      D(i + 1, i + 1) = r * std::cos(th);
    }
    const Matrix V = oracles::random_spd(m, rng, 1.0, 1.0);  // orthogonal similarity
    Eigen::SelfAdjointEigenSolver<Matrix> es(V);
    const Matrix O = es.eigenvectors();
    const Matrix M = O * D * O.transpose();
    CHECK(spectral_radius(M) == doctest::Approx(oracles::gelfand_estimate(M)).epsilon(5e-3));
  }
}

TEST_CASE("spectral radius is similarity invariant") {
  RngStream rng(67);
  Matrix M(3, 3);
  M << 0.2, -0.7, 0.1, 0.0, 0.3, 0.5, 0.0, -0.5, 0.3;
  const double rho = spectral_radius(M);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix S = oracles::random_spd(3, rng);
    const double rho_sim = spectral_radius(S * M * S.inverse());
    CHECK(rho_sim == doctest::Approx(rho).epsilon(1e-8));
  }
  // Basis sign flips are similarities too.
  Matrix F = Matrix::Identity(3, 3);
  F(1, 1) = -1;
  CHECK(spectral_radius(F * M * F) == doctest::Approx(rho).epsilon(1e-12));
}

TEST_CASE("reduce with no active constraints returns the ambient model") {
  const BlockStructure blocks({1, 1});
  const Matrix H = coupled2();
  RngStream rng(71);
  const ScalingMatrix gamma = block_diag_scaling(
      {Matrix::Constant(1, 1, 0.7), Matrix::Constant(1, 1, 1.3)}, blocks);
  const ReducedModel rm = reduce(H, gamma, identity_basis(blocks));
  CHECK((rm.hessian - H).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((rm.scaling - gamma.gamma).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((rm.diag_part - rm.lower_part - rm.lower_part.transpose() - rm.hessian)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("reduce congruence with one pinned coordinate") {
  const Polyhedron P = oracles::nonneg_box(2);
  ActiveSet S;
  S.indices = {0};
  const ReducedBasis E = reduced_basis(P, S);
  const ReducedModel rm = reduce(coupled2(), ScalingMatrix::identity(P.blocks()), E);
  REQUIRE(rm.dim() == 1);
  CHECK(rm.hessian(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(rm.scaling(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("reduce with an empty reduced space") {
  const Polyhedron P = oracles::nonneg_box(1);
  ActiveSet S;
  S.indices = {0};
  const ReducedBasis E = reduced_basis(P, S);
  const ReducedModel rm = reduce(Matrix::Identity(1, 1), ScalingMatrix::identity(P.blocks()), E);
  CHECK(rm.dim() == 0);
  CHECK(cyclic_rate(rm).spectral_radius == 0.0);
  CHECK(jacobi_rate(rm).spectral_radius == 0.0);
}

TEST_CASE("cyclic rate closed form on the coupled quadratic") {
  const ReducedModel rm = newton_model(coupled2(), BlockStructure({1, 1}));
  const RateReport M = cyclic_rate(rm);
  Matrix expect(2, 2);
  expect << 0, -0.5, 0, 0.25;
  CHECK((*M.matrix - expect).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(M.spectral_radius == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("cyclic rate vanishes for decoupled exact minimization") {
  const ReducedModel rm = newton_model(Matrix::Identity(3, 3) * 2.0,
                                       BlockStructure({1, 1, 1}));
  const RateReport M = cyclic_rate(rm);
  CHECK(M.matrix->cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(M.spectral_radius <= 1e-14);
}

TEST_CASE("jacobi rate on the coupled quadratic") {
  const ReducedModel rm = newton_model(coupled2(), BlockStructure({1, 1}));
  const RateReport J = jacobi_rate(rm);
  Matrix expect(2, 2);
  expect << 0, -0.5, -0.5, 0;
  CHECK((*J.matrix - expect).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(J.spectral_radius == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("jacobi rate vanishes under exact Newton") {
  // Diagonal Hessian with per-coordinate Newton scaling.
  const ReducedModel rm1 =
      newton_model(Vector::LinSpaced(3, 1.0, 3.0).asDiagonal(), BlockStructure({1, 1, 1}));
  CHECK(jacobi_rate(rm1).spectral_radius <= 1e-14);
  // Full Newton as one block.
  const ReducedModel rm2 = newton_model(coupled2(), BlockStructure::single(2));
  CHECK(jacobi_rate(rm2).spectral_radius <= 1e-14);
}

TEST_CASE("coordinate shrinkage matrices") {
  const ReducedModel sep = newton_model(Matrix::Identity(2, 2) * 2.0, BlockStructure({1, 1}));
  const RateReport G1 = coordinate_shrinkage(sep, 0);
  Matrix expect1(2, 2);
  expect1 << 0, 0, 0, 1;
  CHECK((*G1.matrix - expect1).cwiseAbs().maxCoeff() <= 1e-14);

  const ReducedModel cpl = newton_model(coupled2(), BlockStructure({1, 1}));
  const RateReport G1c = coordinate_shrinkage(cpl, 0);
  Matrix expect2(2, 2);
  expect2 << 0, -0.5, 0, 1;
  CHECK((*G1c.matrix - expect2).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("shrinkage of an empty block is the identity") {
  const Polyhedron P = oracles::nonneg_box(2, BlockStructure({1, 1}));
  ActiveSet S;
  S.indices = {0};  // pins block 0 entirely
  const ReducedBasis E = reduced_basis(P, S);
  const ReducedModel rm = reduce(coupled2(), ScalingMatrix::identity(P.blocks()), E);
  REQUIRE(rm.dim() == 1);
  const RateReport G0 = coordinate_shrinkage(rm, 0);
  CHECK((*G0.matrix - Matrix::Identity(1, 1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("product identity: single block case") {
  RngStream rng(73);
  const Matrix D = oracles::random_spd(3, rng);
  const Matrix T = oracles::random_spd(3, rng);
  const auto check = verify_product_identity(D, Matrix::Zero(3, 3), T, {3});
  CHECK((check.lhs - (Matrix::Identity(3, 3) - T * D)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(check.max_abs_error <= 1e-12);
}

TEST_CASE("product identity on a random 3-block system") {
  RngStream rng(79);
  const std::vector<int> dims{2, 1, 3};
  const int m = 6;
  Matrix D = Matrix::Zero(m, m);
  int off = 0;
  for (int d : dims) {
    Matrix B(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) B(r, c) = rng.next_uniform(-1.0, 1.0);
    D.block(off, off, d, d) = 0.5 * (B + B.transpose());
    off += d;
  }
  Matrix L = Matrix::Zero(m, m);
  off = 0;
  std::vector<int> offs;
  for (int d : dims) {
    offs.push_back(off);
    off += d;
  }
  for (size_t bi = 1; bi < dims.size(); ++bi)
    for (size_t bj = 0; bj < bi; ++bj)
      for (int r = 0; r < dims[bi]; ++r)
        for (int c = 0; c < dims[bj]; ++c)
          L(offs[bi] + r, offs[bj] + c) = rng.next_uniform(-1.0, 1.0);
  Matrix T = Matrix::Zero(m, m);
  off = 0;
  for (int d : dims) {
    T.block(off, off, d, d) = oracles::random_spd(d, rng, 0.2, 1.5);
    off += d;
  }
  const auto check = verify_product_identity(D, L, T, dims);
  CHECK(check.max_abs_error <= 1e-10);
}

TEST_CASE("cyclic rate equals the shrinkage product on random reduced models") {
  RngStream rng(83);
  for (int trial = 0; trial < 40; ++trial) {
    const int nb = 2 + static_cast<int>(rng.next_u64() % 3);
    std::vector<int> dims;
    int m = 0;
    for (int i = 0; i < nb; ++i) {
      dims.push_back(1 + static_cast<int>(rng.next_u64() % 3));
      m += dims.back();
    }
    const BlockStructure blocks(dims);
    const Matrix H = oracles::random_spd(m, rng, 0.3, 3.0);
    std::vector<Matrix> gb;
    for (int d : dims) gb.push_back(oracles::random_spd(d, rng, 0.2, 1.5));
    const ScalingMatrix gamma = block_diag_scaling(gb, blocks);
    const ReducedModel rm = reduce(H, gamma, identity_basis(blocks));

    Matrix product = Matrix::Identity(m, m);
    for (int i = 0; i < nb; ++i) product = *coordinate_shrinkage(rm, i).matrix * product;
    const RateReport M = cyclic_rate(rm);
    CHECK((*M.matrix - product).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("Ostrowski-Reich consequence: contraction under the condition") {
  RngStream rng(89);
  for (int trial = 0; trial < 25; ++trial) {
    const int m = 2 + static_cast<int>(rng.next_u64() % 5);
    const BlockStructure blocks(std::vector<int>(m, 1));
    const Matrix H = oracles::random_spd(m, rng, 0.4, 3.0);
    const ReducedModel rm = newton_model(H, blocks);  // Ostrowski holds: 2D > D
    CHECK(cyclic_rate(rm).spectral_radius < 1.0);
  }
}

TEST_CASE("Stein-Rosenberg ordering on nonnegative-Jacobi instances") {
  RngStream rng(97);
  for (int trial = 0; trial < 25; ++trial) {
    const int m = 3 + static_cast<int>(rng.next_u64() % 5);
    const Matrix H = random_stieltjes(m, rng);
    const ReducedModel rm = newton_model(H, BlockStructure(std::vector<int>(m, 1)));
    const double rho_m = cyclic_rate(rm).spectral_radius;
    const double rho_j = jacobi_rate(rm).spectral_radius;
    CHECK(rho_m < rho_j);
    CHECK(rho_j < 1.0);
  }
}

TEST_CASE("consistently ordered tridiagonal subfamily: rho(M) = rho(J)^2") {
  RngStream rng(101);
  for (int trial = 0; trial < 15; ++trial) {
    const int m = 3 + static_cast<int>(rng.next_u64() % 6);
    const Matrix H = random_stieltjes(m, rng, /*tridiagonal=*/true);
    const ReducedModel rm = newton_model(H, BlockStructure(std::vector<int>(m, 1)));
    const double rho_m = cyclic_rate(rm).spectral_radius;
    const double rho_j = jacobi_rate(rm).spectral_radius;
    CHECK(rho_m <= rho_j * rho_j + 1e-8);
    CHECK(rho_m >= rho_j * rho_j - 1e-8);
  }
}

TEST_CASE("random rate on the separable instance") {
  const ReducedModel rm = newton_model(Matrix::Identity(2, 2) * 2.0, BlockStructure({1, 1}));
  Vector pi(2);
  pi << 0.5, 0.5;
  CHECK(random_rate_f(rm, pi).spectral_radius == doctest::Approx(0.5).epsilon(1e-12));
  pi << 0.99, 0.01;
  CHECK(random_rate_f(rm, pi).spectral_radius == doctest::Approx(0.99).epsilon(1e-12));
}

TEST_CASE("random rate bounds and the degenerate single-block form") {
  RngStream rng(103);
  for (int trial = 0; trial < 15; ++trial) {
    const int m = 2 + static_cast<int>(rng.next_u64() % 5);
    const BlockStructure blocks(std::vector<int>(m, 1));
    const Matrix H = oracles::random_spd(m, rng, 0.3, 4.0);
    const ReducedModel rm = newton_model(H, blocks);
    Vector pi = Vector::Constant(m, 1.0 / m);
    const double rate = random_rate_f(rm, pi).spectral_radius;
    CHECK(rate <= 1.0 + 1e-12);
    CHECK(rate < 1.0);
  }

  // n = 1: the rate reduces to rho(J' H J H^{-1}) computed directly.
  const BlockStructure one = BlockStructure::single(3);
  const Matrix H = oracles::random_spd(3, rng, 0.5, 2.0);
  ScalingMatrix gamma = ScalingMatrix::identity(one);
  gamma.gamma *= 0.3;
  gamma.eig_lower = gamma.eig_upper = 0.3;
  const ReducedModel rm = reduce(H, gamma, identity_basis(one));
  Vector pi1(1);
  pi1 << 1.0;
  const Matrix J = Matrix::Identity(3, 3) - rm.scaling * rm.hessian;
  const double direct = spectral_radius(J.transpose() * H * J * H.inverse());
  CHECK(random_rate_f(rm, pi1).spectral_radius == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("random rate declines regularization on a singular reduced Hessian") {
  const BlockStructure blocks({1, 1});
  Matrix H(2, 2);
  H << 1, 1, 1, 1;  // PSD singular
  std::vector<Matrix> gb{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.5)};
  const ReducedModel rm = reduce(H, block_diag_scaling(gb, blocks), identity_basis(blocks));
  Vector pi(2);
  pi << 0.5, 0.5;
  CHECK_THROWS_AS(random_rate_f(rm, pi, false), MissingDataError);
  const RateReport rep = random_rate_f(rm, pi, true);
  CHECK(rep.hypotheses.regularized);
  CHECK(rep.spectral_radius <= 1.0 + 1e-9);
}

TEST_CASE("supernorm plug-in values") {
  const BlockStructure blocks({1, 1});
  const ObjectiveModel f =
      QuadraticObjective{Matrix::Identity(2, 2), Vector::Zero(2)}.model(blocks);
  const Vector xstar = Vector::Zero(2);
  Vector pi(2);
  pi << 0.5, 0.5;
  // Unit per-block scaling: V = [2 diag(1/2, 1/2)]^{-1} = I.
  const Matrix V = supernorm_weight(pi, {Matrix::Identity(1, 1), Matrix::Identity(1, 1)}, blocks);
  CHECK((V - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);

  CHECK(supernorm(xstar, xstar, f, V, 0.5) == 0.0);
  Vector x(2);
  x << 1.0, 0.0;
  CHECK(supernorm(x, xstar, f, V, 0.5) == doctest::Approx(1.0).epsilon(1e-14));

  // Homogeneity: doubling both terms doubles the value.
  const ObjectiveModel f2 =
      QuadraticObjective{2.0 * Matrix::Identity(2, 2), Vector::Zero(2)}.model(blocks);
  CHECK(supernorm(x, xstar, f2, 2.0 * V, 0.5) ==
        doctest::Approx(2.0 * supernorm(x, xstar, f, V, 0.5)).epsilon(1e-14));
}

TEST_CASE("supernorm random rate") {
  const BlockStructure blocks({1, 1});
  const Matrix H = Matrix::Identity(2, 2) * 2.0;
  const ReducedModel rm = newton_model(H, blocks);
  Vector pi(2);
  pi << 0.5, 0.5;
  // Ghat = D^{-1} = I/2: V = [2 diag(1/4, 1/4)]^{-1} = 2I.
  const Matrix V =
      supernorm_weight(pi, {Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.5)}, blocks);
  CHECK((V - 2.0 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
  const RateReport rep = random_rate_supernorm(rm, pi, V);
  CHECK(rep.spectral_radius == doctest::Approx(0.5).epsilon(1e-12));

  // The max structure dominates the f-rate.
  RngStream rng(107);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 2 + static_cast<int>(rng.next_u64() % 4);
    const BlockStructure bl(std::vector<int>(m, 1));
    const Matrix Hr = oracles::random_spd(m, rng, 0.5, 3.0);
    const ReducedModel rmr = newton_model(Hr, bl);
    Vector pir = Vector::Constant(m, 1.0 / m);
    std::vector<Matrix> ghat;
    for (int i = 0; i < m; ++i) ghat.push_back(Matrix::Constant(1, 1, 1.0 / Hr(i, i)));
    const Matrix Vr = supernorm_weight(pir, ghat, bl);
    CHECK(random_rate_supernorm(rmr, pir, Vr).spectral_radius >=
          random_rate_f(rmr, pir).spectral_radius - 1e-12);
  }
}

TEST_CASE("lemma-1 envelope factors") {
  CHECK(lemma1_envelopes(2, 0.5, 1.0, 2).sublinear_factor == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(lemma1_envelopes(2, 0.5, 1.0, 0).sublinear_factor == 1.0);
  // Tight case umin = n pmin: the linear factor becomes 1 - pmin.
  const double pmin = 0.3;
  const int n = 3;
  const auto env = lemma1_envelopes(n, pmin, n * pmin, 5);
  CHECK(env.linear_factor == doctest::Approx(1.0 - pmin).epsilon(1e-12));
  CHECK_THROWS_AS(lemma1_envelopes(2, 0.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("lemma-1 u constant from the generalized eigenvalue") {
  RngStream rng(109);
  const Matrix V = oracles::random_spd(3, rng);
  const Matrix U = oracles::random_spd(3, rng);
  const double u = lemma1_u_min(U, V);
  Eigen::SelfAdjointEigenSolver<Matrix> es(U - u * V);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);  // uV <= U holds
  Eigen::SelfAdjointEigenSolver<Matrix> es2(U - (u * 1.01) * V);
  CHECK(es2.eigenvalues().minCoeff() < 0);  // and u is maximal
}

TEST_CASE("series scaling: order zero is the block Newton scaling") {
  const BlockStructure blocks({1, 1});
  const ScalingMatrix g0 = newton_taylor_scaling(coupled2(), 0, blocks);
  CHECK((g0.gamma - Matrix::Identity(2, 2) * 0.5).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("series scaling of a diagonal Hessian is the exact inverse") {
  const Matrix H = Vector::LinSpaced(3, 1.0, 3.0).asDiagonal();
  for (int q : {0, 1, 3}) {
    const ScalingMatrix g = newton_taylor_scaling(H, q, BlockStructure({1, 1, 1}));
    CHECK((g.gamma - H.inverse()).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("series scaling order one on the coupled quadratic") {
  // With H = D - L - L', the core is S = D^{-1/2}(D - H)D^{-1/2} and the
  // partial sum converges to H^{-1}; the off-diagonal is negative here.
  const ScalingMatrix g1 = newton_taylor_scaling(coupled2(), 1, BlockStructure({1, 1}));
  Matrix expect(2, 2);
  expect << 0.5, -0.25, -0.25, 0.5;
  CHECK((g1.gamma - expect).cwiseAbs().maxCoeff() <= 1e-14);

  const ScalingMatrix g20 = newton_taylor_scaling(coupled2(), 20, BlockStructure({1, 1}));
  CHECK((g20.gamma - coupled2().inverse()).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("series scaling rejects an invalid series") {
  Matrix H(2, 2);
  H << 1, -2, -2, 1;  // rho(S) = 2
  CHECK_THROWS_AS(newton_taylor_scaling(H, 1, BlockStructure({1, 1})), std::invalid_argument);
}

TEST_CASE("series rate on the coupled quadratic") {
  const BlockStructure blocks({1, 1});
  const ReducedBasis E = identity_basis(blocks);
  for (int q : {0, 1, 2, 3}) {
    const ScalingMatrix g = newton_taylor_scaling(coupled2(), q, blocks);
    const RateReport rep = newton_taylor_rate(coupled2(), g, E, q);
    CHECK(rep.spectral_radius == doctest::Approx(std::pow(0.5, q + 1)).epsilon(1e-10));
  }
  const Matrix Hd = Vector::LinSpaced(2, 1.0, 2.0).asDiagonal();
  const ScalingMatrix gd = newton_taylor_scaling(Hd, 2, blocks);
  CHECK(newton_taylor_rate(Hd, gd, E, 2).spectral_radius <= 1e-14);
}

TEST_CASE("series rate strictly decreases with the order") {
  RngStream rng(113);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 2 + static_cast<int>(rng.next_u64() % 5);
    const BlockStructure blocks(std::vector<int>(m, 1));
    Matrix H = Matrix::Zero(m, m);
    for (int r = 0; r < m; ++r)
      for (int c = r + 1; c < m; ++c) {
        const double v = rng.next_uniform(-1.0, 1.0);
        H(r, c) = v;
        H(c, r) = v;
      }
    for (int r = 0; r < m; ++r)
      H(r, r) = H.row(r).cwiseAbs().sum() * rng.next_uniform(1.1, 1.6) + 0.2;
    const ReducedBasis E = identity_basis(blocks);
    double prev = std::numeric_limits<double>::infinity();
    for (int q = 0; q <= 3; ++q) {
      const ScalingMatrix g = newton_taylor_scaling(H, q, blocks);
      const double rho = newton_taylor_rate(H, g, E, q).spectral_radius;
      CHECK(rho < prev);
      prev = rho;
    }
  }
}

TEST_CASE("series rate at order zero equals the Jacobi rate with Newton scaling") {
  RngStream rng(127);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 3 + static_cast<int>(rng.next_u64() % 4);
    const BlockStructure blocks(std::vector<int>(m, 1));
    Matrix H = oracles::random_spd(m, rng, 0.5, 2.0);
    for (int r = 0; r < m; ++r) H(r, r) += H.row(r).cwiseAbs().sum();
    const ReducedBasis E = identity_basis(blocks);
    const ScalingMatrix g0 = newton_taylor_scaling(H, 0, blocks);
    const RateReport series = newton_taylor_rate(H, g0, E, 0);
    const RateReport jac = jacobi_rate(newton_model(H, blocks));
    CHECK((*series.matrix - *jac.matrix).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(series.spectral_radius == doctest::Approx(jac.spectral_radius).epsilon(1e-12));
  }
}

TEST_CASE("efficiency conditions") {
  const BlockStructure blocks({1, 1});
  const Matrix H = coupled2();
  const ReducedModel rm = newton_model(H, blocks);
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = H(0, 0);
  D(1, 1) = H(1, 1);

  const ScalingMatrix newton = ScalingMatrix::newton_block(H, blocks);
  const EfficiencyFlags good = efficiency_conditions(newton, D, 0.25, rm);
  CHECK(good.efficiency);  // 2(1 - sigma) D > D
  CHECK(good.ostrowski);

  ScalingMatrix big = newton;
  big.gamma *= 3.0;
  const EfficiencyFlags bad = efficiency_conditions(big, D, 0.25, rm);
  CHECK_FALSE(bad.efficiency);  // 2 * 0.75 / 3 = 0.5 < 1

  // Empty reduced space: both conditions hold vacuously.
  const Polyhedron P1 = oracles::nonneg_box(1);
  ActiveSet S;
  S.indices = {0};
  const ReducedModel empty =
      reduce(Matrix::Identity(1, 1), ScalingMatrix::identity(P1.blocks()), reduced_basis(P1, S));
  const EfficiencyFlags vac = efficiency_conditions(ScalingMatrix::identity(P1.blocks()),
                                                    Matrix::Identity(1, 1), 0.25, empty);
  CHECK(vac.ostrowski);
}
