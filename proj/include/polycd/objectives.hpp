#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "polycd/block_structure.hpp"
#include "polycd/errors.hpp"
#include "polycd/rng.hpp"

namespace polycd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Smooth objective with block Lipschitz data. Callbacks must be reentrant and
/// side-effect free; the harness may call them from several workers at once.
struct ObjectiveModel {
  BlockStructure blocks;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;  // empty when unavailable

  /// Per-block gradient Lipschitz bounds L_i (m_i x m_i, symmetric PD).
  std::vector<Matrix> lipschitz_blocks;
  /// Strong-convexity matrix U when known; operations that need it refuse
  /// with MissingDataError rather than estimating.
  std::optional<Matrix> strong_convexity;

  int dim() const { return blocks.total(); }
  bool has_hessian() const { return static_cast<bool>(hessian); }
  Matrix hessian_at(const Vector& x) const;
  Matrix lipschitz_full() const;
};

/// f(x) = 0.5 x'Qx + c'x with exact derivatives and L_i = Q_ii.
struct QuadraticObjective {
  Matrix Q;
  Vector c;

  ObjectiveModel model(const BlockStructure& blocks) const;
  Vector unconstrained_minimizer() const;  // solves Qx = -c (Q PD)
};

/// g(mu) = f(x_1, ..., x_{i-1}, mu, x_{i+1}, ..., x_n), a one-block model whose
/// gradient/Hessian are the block-i slices of f's at the composite point.
ObjectiveModel coordinate_restriction(const ObjectiveModel& f, int i, const Vector& x);

struct FiniteDiffReport {
  double max_gradient_rel_error = 0.0;
  std::optional<double> max_hessian_rel_error;
  int samples = 0;
};

/// Central-difference audit of the model's derivatives at random points around
/// `anchor` (component offsets uniform in [-1, 1]).
FiniteDiffReport finite_diff_audit(const ObjectiveModel& f, const Vector& anchor,
                                   int sample_count, double step, std::uint64_t seed = 7);

/// Built-in nonquadratic test objectives, addressable as "registry:<name>" in
/// problem files. Documented strictly convex with the stated Lipschitz data on
/// the box |x_i| <= 2:
///   exp_plus_square  (m = 2): exp(x_1) + x_2^2
///   exp_tridiag      (any m): sum_i exp(x_i) + 0.5 x'Tx, T = tridiag(-1, 2, -1)
ObjectiveModel registry_objective(const std::string& name, const BlockStructure& blocks);

}  // namespace polycd
