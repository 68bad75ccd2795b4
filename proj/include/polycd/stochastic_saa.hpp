#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <vector>

#include "polycd/objectives.hpp"
#include "polycd/polytope.hpp"
#include "polycd/solvers.hpp"

namespace polycd {

/// Expectation objective known only through simulated measurements g(x, w).
/// Uniqueness of the per-estimate minimizer is assumed for the built-in
/// families and not verified for user-supplied samplers.
struct StochasticObjective {
  BlockStructure blocks;
  std::function<Vector(RngStream&)> sampler;
  std::function<double(const Vector& x, const Vector& omega)> measurement;
  std::function<Vector(const Vector&, const Vector&)> measurement_gradient;
  std::function<Matrix(const Vector&, const Vector&)> measurement_hessian;  // optional

  std::vector<Matrix> lipschitz_blocks;  // common bound across estimates
  std::optional<Matrix> strong_convexity;
  std::optional<ObjectiveModel> true_objective;            // diagnostics only
  std::function<Matrix(const Vector&)> gradient_covariance_at;  // optional

  int dim() const { return blocks.total(); }
};

struct SampleSchedule {
  enum class Rule { geometric, linear };
  Rule rule = Rule::geometric;
  double q0 = 1.0;
  double growth = 2.0;  // gamma > 1 for geometric, c > 0 for linear

  static SampleSchedule geometric(double q0, double gamma);
  static SampleSchedule linear(double q0, double c);

  /// Sample count at outer step k; nondecreasing and unbounded.
  int count(int k) const;
};

/// Empirical average of the measurements over the given samples.
ObjectiveModel saa_objective(const StochasticObjective& stoch,
                             const std::vector<Vector>& samples);

struct SaaRunResult {
  IterateTrace trace;            // outer iterates x^k
  std::vector<Vector> mu_trace;  // per-step minimizers of the estimate (when recorded)
  std::vector<int> sample_counts;
};

/// Sequential scheme x^{k+1} = A(f^k, x^k): at each outer step draws q(k)
/// fresh samples (stream RngStream(seed).split(1)), builds the averaged
/// estimate and applies exactly one application of the inner map. When
/// record_mu is set, each f^k is minimized to residual 1e-12 by the
/// centralized Newton map (gradient steps when no Hessian; 200-iteration cap).
SaaRunResult saa_sequential_run(const StochasticObjective& stoch, const SampleSchedule& schedule,
                                const SolverConfig& inner, const Polyhedron& P,
                                const Vector& start, int outer_steps, bool record_mu);

/// Covariance of the limit of sqrt(q) (mu_q - xstar):
/// C = E H~^{-1} E' Cov_grad E H~^{-1} E'. Throws on singular H~.
Matrix delta_method_covariance(const Matrix& hessian_at_solution, const ReducedBasis& E,
                               const Matrix& gradient_covariance);

struct SaaDiagnostics {
  Matrix empirical_covariance;   // of sqrt(q) (mu - xstar) across trials
  Matrix predicted_covariance;
  double frobenius_rel_error;
  double pinned_to_free_rms_ratio;  // scaled error outside span(E) vs inside
  int trials;
};

/// Compares the scaled estimator spread against the predicted covariance.
/// Requires at least 100 recorded minimizers at the same sample count.
SaaDiagnostics saa_diagnostics(const std::vector<Vector>& mu_at_fixed_step, int sample_count,
                               const Vector& xstar, const Matrix& predicted_covariance,
                               const ReducedBasis& E);

}  // namespace polycd
