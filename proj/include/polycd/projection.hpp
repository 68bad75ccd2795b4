#pragma once

#include <Eigen/Core>

#include "polycd/objectives.hpp"
#include "polycd/polytope.hpp"

namespace polycd {

/// Symmetric positive definite scaling with known eigenvalue bounds (t, T),
/// optionally tagged block-diagonal per the block structure.
struct ScalingMatrix {
  Matrix gamma;
  double eig_lower = 1.0;
  double eig_upper = 1.0;
  bool block_diagonal = false;
  BlockStructure blocks;

  static ScalingMatrix identity(const BlockStructure& blocks);
  static ScalingMatrix from_diagonal(const Vector& d, const BlockStructure& blocks);

  /// Block-diagonal Newton scaling: per-block inverse Hessians with eigenvalues
  /// clamped into [1e-8, 1e8] before inversion.
  static ScalingMatrix newton_block(const Matrix& hessian, const BlockStructure& blocks);

  Matrix block(int i) const;
  int dim() const { return static_cast<int>(gamma.rows()); }
};

struct ProjectionResult {
  Vector point;
  std::vector<int> active;  // final working set (0-based row indices, sorted)
  Vector multipliers;       // KKT multipliers over `active`
  int iterations;
};

/// Scaled projection: argmin over {y : Ay <= b} of || y - z ||^2 in the
/// Gamma^{-1} norm. Dual active-set iteration on the KKT system, cap 50*p.
/// Throws InfeasibleError when no feasible point exists, IterationCapError
/// when the cap is hit on a feasible set.
ProjectionResult scaled_project_detailed(const Polyhedron& P, const Vector& z,
                                         const ScalingMatrix& gamma);
Vector scaled_project(const Polyhedron& P, const Vector& z, const ScalingMatrix& gamma);

/// Gradient-projection candidate: argmin over y in P of
/// grad f(x)'(y - x) + 0.5 || y - x ||^2 in the [alpha Gamma]^{-1} norm,
/// computed as the scaled projection of x - alpha Gamma grad f(x).
Vector gp_candidate(const ObjectiveModel& f, const Polyhedron& P, const Vector& x,
                    const ScalingMatrix& gamma, double alpha);

/// || gp_candidate(f, P, x, I, 1) - x ||; zero exactly at stationary points.
double optimality_residual(const ObjectiveModel& f, const Polyhedron& P, const Vector& x);

}  // namespace polycd
