#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "polycd/objectives.hpp"
#include "polycd/polytope.hpp"
#include "polycd/projection.hpp"
#include "polycd/rng.hpp"

namespace polycd {

enum class Variant { centralized, cyclic, jacobi, random_cd };
enum class StepRule { armijo, unit };

struct ScalingSpec {
  enum class Kind { identity, fixed_diagonal, newton_block, newton_taylor };
  Kind kind = Kind::identity;
  Vector diagonal;  // fixed_diagonal values, full ambient length
  int order = 0;    // newton_taylor series order q

  static ScalingSpec identity() { return {}; }
  static ScalingSpec fixed_diagonal(Vector d);
  static ScalingSpec newton_block();
  static ScalingSpec newton_taylor(int q);
};

/// Scaling matrix of the configured strategy evaluated at x.
ScalingMatrix evaluate_scaling(const ScalingSpec& spec, const ObjectiveModel& f, const Vector& x);

struct SolverConfig {
  double beta = 0.5;
  double sigma = 0.25;  // below 1/2 so the same config satisfies the random-variant lemma
  Variant variant = Variant::centralized;
  ScalingSpec scaling;
  StepRule step_rule = StepRule::armijo;
  Vector pi;  // random variant block distribution; empty means uniform
  std::uint64_t rng_seed = 0;
  int max_iters = 100000;
  double stop_tol = 1e-10;
  std::vector<int> cyclic_order;  // empty means ascending block order

  void validate(const BlockStructure& blocks) const;
  Vector effective_pi(int n) const;
};

struct TraceRecord {
  int k = 0;
  Vector point;
  double f_value = 0.0;
  double residual = 0.0;             // optimality residual at `point`
  double alpha = 1.0;                // min over blocks for cyclic sweeps
  std::vector<double> block_alphas;  // cyclic sweeps only
  int block = -1;                    // random variant: updated block
  std::vector<int> active;           // active set at `point` (0-based)
  double t_wall_ms = 0.0;
};

struct IterateTrace {
  std::vector<TraceRecord> records;
  bool converged = false;

  int steps() const { return static_cast<int>(records.size()) - 1; }
  const TraceRecord& last() const { return records.back(); }
};

struct ArmijoResult {
  double alpha;
  Vector next;
  int backtracks;
};

/// Largest alpha in {beta^m} with
/// f(x) - f(cand(alpha)) >= sigma ||cand(alpha) - x||^2 in the [alpha Gamma]^{-1} norm.
/// Throws BacktrackCapError past 60 backtracks (mis-specified Lipschitz data).
ArmijoResult armijo_step(const ObjectiveModel& f, const Polyhedron& P, const Vector& x,
                         const ScalingMatrix& gamma, double beta = 0.5, double sigma = 0.25);

struct StepResult {
  Vector next;
  double alpha;
};

StepResult centralized_step(const ObjectiveModel& f, const Polyhedron& P,
                            const SolverConfig& config, const Vector& x);

struct SweepResult {
  Vector next;
  std::vector<double> block_alphas;
};

/// One pass over the blocks in the configured order, each block's restriction
/// evaluated at the partially updated point.
SweepResult cyclic_sweep(const ObjectiveModel& f, const Polyhedron& P, const SolverConfig& config,
                         const Vector& x);

/// All block updates computed from the same point with one common step size;
/// with the Armijo rule the acceptance test is the full-space condition.
StepResult jacobi_step(const ObjectiveModel& f, const Polyhedron& P, const SolverConfig& config,
                       const Vector& x);

struct RandomStepResult {
  int block;
  Vector next;
  double alpha;
};

RandomStepResult random_step(const ObjectiveModel& f, const Polyhedron& P,
                             const SolverConfig& config, const Vector& x, RngStream& rng);

/// Iterates the configured map until the optimality residual drops below
/// stop_tol or max_iters is reached, recording every step. The random
/// variant's block-selection stream is RngStream(seed).split(0).
IterateTrace run(const ObjectiveModel& f, const Polyhedron& P, const Vector& start,
                 const SolverConfig& config);

}  // namespace polycd
