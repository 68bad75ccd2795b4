#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "polycd/objectives.hpp"
#include "polycd/polytope.hpp"
#include "polycd/projection.hpp"

namespace polycd {

/// Reduced-space model at a solution: congruences of the Hessian and scaling
/// by the reduced basis, plus the block splitting H = D - L - L' used by the
/// sweep rate formulas.
struct ReducedModel {
  Matrix hessian;          // H~ = E'HE
  Matrix scaling;          // Lam~ = [E'Gamma^{-1}E]^{-1}, block-diagonal
  Matrix diag_part;        // D~
  Matrix lower_part;       // L~ (strictly lower block part; H~ = D~ - L~ - L~')
  std::vector<int> reduced_dims;

  int dim() const { return static_cast<int>(hessian.rows()); }
  int n_blocks() const { return static_cast<int>(reduced_dims.size()); }
  int block_offset(int i) const;
};

enum class RateKind {
  cyclic,
  jacobi,
  shrinkage,
  random_f,
  random_supernorm,
  newton_taylor,
  lemma1_linear,
  lemma1_sublinear,
};

std::string rate_kind_name(RateKind k);

struct HypothesisFlags {
  bool strict_complementarity = true;
  bool hessian_pd = true;
  bool efficiency = true;   // 2(1-sigma) Gamma^{-1} > D at the solution
  bool ostrowski = true;    // 2 Lam~^{-1} > D~
  bool regularized = false; // H~ was floored to H~ + eps I for the similarity transform
};

struct RateReport {
  RateKind kind;
  int reduced_dim = 0;
  std::optional<Matrix> matrix;
  double spectral_radius = 0.0;
  HypothesisFlags hypotheses;
  int block = -1;  // shrinkage reports
  int order = -1;  // newton_taylor reports
};

/// Largest eigenvalue magnitude, read from the real Schur form's 1x1/2x2
/// diagonal blocks. Accurate to 1e-8 relative for dimension <= 64; dimension
/// capped at 512.
double spectral_radius(const Matrix& M);

ReducedModel reduce(const Matrix& hessian, const ScalingMatrix& gamma, const ReducedBasis& E);

/// Cyclic sweep rate M = [Lam~^{-1} - L~]^{-1} [Lam~^{-1} - D~ + L~'].
RateReport cyclic_rate(const ReducedModel& rm);

/// Synchronous rate J = I~ - Lam~ H~.
RateReport jacobi_rate(const ReducedModel& rm);

/// Single-direction shrinkage G~_i = I~ - diag(0,..,I~_i,..,0) Lam~ H~.
RateReport coordinate_shrinkage(const ReducedModel& rm, int i);

struct ProductIdentityCheck {
  Matrix lhs;  // G_n ... G_1 by explicit multiplication
  Matrix rhs;  // (T^{-1} - L)^{-1} (T^{-1} - D + L')
  double max_abs_error;
};

/// Matrix-product identity behind the cyclic rate: with H = D - L - L' and
/// G_i = I - diag(0,..,I_i,..,0) T H, the product G_n...G_1 equals the closed
/// form. Both sides are computed and compared.
ProductIdentityCheck verify_product_identity(const Matrix& D, const Matrix& L, const Matrix& T,
                                             const std::vector<int>& block_dims);

/// Expected f-gap decay rate of the randomized variant:
/// rho( sum_i pi_i G~_i' H~ G~_i H~^{-1} ), evaluated through the similarity
/// N_i = H~^{1/2} G~_i H~^{-1/2}. When H~ has eigenvalues below 1e-12 the
/// computation runs on H~ + 1e-10 I and flags the report as regularized
/// (refused with MissingDataError when allow_regularization is false).
RateReport random_rate_f(const ReducedModel& rm, const Vector& pi,
                         bool allow_regularization = true);

/// Merit weight V = [n diag(pi_1 Ghat_1, ..., pi_n Ghat_n)]^{-1}.
Matrix supernorm_weight(const Vector& pi, const std::vector<Matrix>& gamma_hat_blocks,
                        const BlockStructure& blocks);

/// Psi(x) = (n pmin / 2) ||x - xstar||_V^2 + f(x) - f(xstar).
double supernorm(const Vector& x, const Vector& xstar, const ObjectiveModel& f, const Matrix& V,
                 double p_min);

/// max{ random_rate_f, rho( sum_i pi_i G~_i' V~ G~_i V~^{-1} ) } with V~ = E'VE.
RateReport random_rate_supernorm(const ReducedModel& rm, const Vector& pi, const Matrix& V_tilde);

struct Lemma1Envelopes {
  double sublinear_factor;  // 1 / (1 + pmin k)
  double linear_factor;     // 1 - 2 pmin umin / (umin + n pmin)
};

Lemma1Envelopes lemma1_envelopes(int n, double p_min, double u_min, int k);

/// Largest u with u V <= U (smallest generalized eigenvalue of (U, V)).
double lemma1_u_min(const Matrix& U, const Matrix& V);

/// Truncated inverse-Hessian series scaling
/// Gamma = D^{-1/2} [sum_{t=0}^q S^t] D^{-1/2},  S = D^{-1/2}(L + L')D^{-1/2}.
/// Requires rho(S) < 1 (checked directly); otherwise throws.
ScalingMatrix newton_taylor_scaling(const Matrix& hessian, int q, const BlockStructure& blocks);

/// Rate of the series-scaled synchronous map:
/// Z~ = Lam~ E' Gamma^{-1} Z E with Z = D^{-1/2} S^{q+1} D^{1/2}.
RateReport newton_taylor_rate(const Matrix& hessian, const ScalingMatrix& gamma,
                              const ReducedBasis& E, int q);

struct EfficiencyFlags {
  bool efficiency;  // 2(1-sigma) Gamma^{-1} > D at the solution
  bool ostrowski;   // 2 Lam~^{-1} > D~
};

EfficiencyFlags efficiency_conditions(const ScalingMatrix& gamma_at_solution,
                                      const Matrix& D_at_solution, double sigma,
                                      const ReducedModel& rm);

}  // namespace polycd
