#include "polycd/solvers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "polycd/rate_analysis.hpp"

namespace polycd {

ScalingSpec ScalingSpec::fixed_diagonal(Vector d) {
  ScalingSpec s;
  s.kind = Kind::fixed_diagonal;
  s.diagonal = std::move(d);
  return s;
}

ScalingSpec ScalingSpec::newton_block() {
  ScalingSpec s;
  s.kind = Kind::newton_block;
  return s;
}

ScalingSpec ScalingSpec::newton_taylor(int q) {
  ScalingSpec s;
  s.kind = Kind::newton_taylor;
  s.order = q;
  return s;
}

ScalingMatrix evaluate_scaling(const ScalingSpec& spec, const ObjectiveModel& f,
                               const Vector& x) {
  switch (spec.kind) {
    case ScalingSpec::Kind::identity:
      return ScalingMatrix::identity(f.blocks);
    case ScalingSpec::Kind::fixed_diagonal:
      return ScalingMatrix::from_diagonal(spec.diagonal, f.blocks);
    case ScalingSpec::Kind::newton_block:
      return ScalingMatrix::newton_block(f.hessian_at(x), f.blocks);
    case ScalingSpec::Kind::newton_taylor:
      return newton_taylor_scaling(f.hessian_at(x), spec.order, f.blocks);
  }
  throw std::logic_error("unreachable");
}

void SolverConfig::validate(const BlockStructure& blocks) const {
  if (beta <= 0 || beta >= 1) throw std::invalid_argument("beta must lie in (0, 1)");
  if (sigma <= 0 || sigma >= 1) throw std::invalid_argument("sigma must lie in (0, 1)");
  if (max_iters < 0) throw std::invalid_argument("max_iters must be nonnegative");
  if (stop_tol < 0) throw std::invalid_argument("stop_tol must be nonnegative");
  if (variant == Variant::random_cd && pi.size() > 0) {
    if (pi.size() != blocks.n()) throw std::invalid_argument("pi length must equal block count");
    if ((pi.array() <= 0).any())
      throw std::invalid_argument("pi entries must be positive");
    if (std::abs(pi.sum() - 1.0) > 1e-12) throw std::invalid_argument("pi must sum to 1");
  }
  if (!cyclic_order.empty()) {
    std::vector<int> sorted = cyclic_order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(blocks.n());
    std::iota(expect.begin(), expect.end(), 0);
    if (sorted != expect)
      throw std::invalid_argument("cyclic_order must be a permutation of the blocks");
  }
  if (scaling.kind == ScalingSpec::Kind::newton_taylor && variant != Variant::centralized)
    throw std::invalid_argument(
        "series scaling is a full-space strategy; use the centralized variant");
  if (scaling.kind == ScalingSpec::Kind::fixed_diagonal &&
      scaling.diagonal.size() != blocks.total())
    throw std::invalid_argument("fixed-diagonal scaling length mismatch");
}

Vector SolverConfig::effective_pi(int n) const {
  if (pi.size() > 0) return pi;
  return Vector::Constant(n, 1.0 / n);
}

namespace {

// Restriction of a fixed ambient scaling strategy to one block.
ScalingSpec slice_spec(const ScalingSpec& spec, const BlockStructure& blocks, int i) {
  switch (spec.kind) {
    case ScalingSpec::Kind::identity:
      return ScalingSpec::identity();
    case ScalingSpec::Kind::fixed_diagonal:
      return ScalingSpec::fixed_diagonal(
          spec.diagonal.segment(blocks.offset(i), blocks.dim(i)));
    case ScalingSpec::Kind::newton_block:
      return ScalingSpec::newton_block();
    case ScalingSpec::Kind::newton_taylor:
      throw std::invalid_argument("series scaling cannot be restricted to one block");
  }
  throw std::logic_error("unreachable");
}

double scaled_sq_norm(const Vector& d, const ScalingMatrix& gamma) {
  return d.dot(gamma.gamma.ldlt().solve(d));
}

constexpr int kBacktrackCap = 60;

struct BlockWorkspace {
  std::vector<Polyhedron> sub;
};

BlockWorkspace make_workspace(const Polyhedron& P) {
  BlockWorkspace ws;
  ws.sub.reserve(P.blocks().n());
  for (int i = 0; i < P.blocks().n(); ++i) ws.sub.push_back(P.block_restriction(i));
  return ws;
}

struct BlockStepOut {
  Vector block_point;
  double alpha;
};

BlockStepOut block_step(const ObjectiveModel& restricted, const Polyhedron& subP,
                        const Vector& xi, const ScalingSpec& spec, const SolverConfig& cfg) {
  const ScalingMatrix gamma = evaluate_scaling(spec, restricted, xi);
  if (cfg.step_rule == StepRule::unit)
    return {gp_candidate(restricted, subP, xi, gamma, 1.0), 1.0};
  const ArmijoResult ar = armijo_step(restricted, subP, xi, gamma, cfg.beta, cfg.sigma);
  return {ar.next, ar.alpha};
}

}  // namespace

ArmijoResult armijo_step(const ObjectiveModel& f, const Polyhedron& P, const Vector& x,
                         const ScalingMatrix& gamma, double beta, double sigma) {
  const double fx = f.value(x);
  double alpha = 1.0;
  for (int m = 0; m <= kBacktrackCap; ++m) {
    const Vector cand = gp_candidate(f, P, x, gamma, alpha);
    const Vector d = cand - x;
    const double required = (sigma / alpha) * scaled_sq_norm(d, gamma);
    if (fx - f.value(cand) >= required) return {alpha, cand, m};
    alpha *= beta;
  }
  std::ostringstream msg;
  msg << "Armijo backtracking exceeded " << kBacktrackCap
      << " halvings; block Lipschitz data is likely mis-specified (f(x) = " << fx << ")";
  throw BacktrackCapError(msg.str());
}

StepResult centralized_step(const ObjectiveModel& f, const Polyhedron& P,
                            const SolverConfig& config, const Vector& x) {
  const ScalingMatrix gamma = evaluate_scaling(config.scaling, f, x);
  if (config.step_rule == StepRule::unit)
    return {gp_candidate(f, P, x, gamma, 1.0), 1.0};
  const ArmijoResult ar = armijo_step(f, P, x, gamma, config.beta, config.sigma);
  return {ar.next, ar.alpha};
}

namespace {

SweepResult cyclic_sweep_ws(const ObjectiveModel& f, const Polyhedron& P,
                            const BlockWorkspace& ws, const SolverConfig& config,
                            const Vector& x) {
  const int n = P.blocks().n();
  std::vector<int> order = config.cyclic_order;
  if (order.empty()) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
  }
  SweepResult out;
  out.next = x;
  out.block_alphas.assign(n, 1.0);
  for (int i : order) {
    const ObjectiveModel g = coordinate_restriction(f, i, out.next);
    const Vector xi = out.next.segment(P.blocks().offset(i), P.blocks().dim(i));
    const BlockStepOut step =
        block_step(g, ws.sub[i], xi, slice_spec(config.scaling, P.blocks(), i), config);
    out.next.segment(P.blocks().offset(i), P.blocks().dim(i)) = step.block_point;
    out.block_alphas[i] = step.alpha;
  }
  return out;
}

StepResult jacobi_step_ws(const ObjectiveModel& f, const Polyhedron& P, const BlockWorkspace& ws,
                          const SolverConfig& config, const Vector& x) {
  const int n = P.blocks().n();
  if (n == 1) return centralized_step(f, P, config, x);

  // Per-block scaling and gradient, all read from the same point. The block
  // candidates decouple over the Cartesian product, so they can be evaluated
  // in parallel.
  const Vector grad = f.gradient(x);
  std::vector<ScalingMatrix> gammas(n);
  std::vector<Eigen::LDLT<Matrix>> gamma_solvers(n);
  for (int i = 0; i < n; ++i) {
    const ObjectiveModel g = coordinate_restriction(f, i, x);
    const Vector xi = x.segment(P.blocks().offset(i), P.blocks().dim(i));
    gammas[i] = evaluate_scaling(slice_spec(config.scaling, P.blocks(), i), g, xi);
    gamma_solvers[i].compute(gammas[i].gamma);
  }

  auto candidate = [&](double alpha) -> Vector {
    Vector y(x.size());
#pragma omp parallel for schedule(static) if (n >= 8)
    for (int i = 0; i < n; ++i) {
      const int off = P.blocks().offset(i);
      const int mi = P.blocks().dim(i);
      const Vector zi = x.segment(off, mi) - alpha * (gammas[i].gamma * grad.segment(off, mi));
      y.segment(off, mi) = scaled_project(ws.sub[i], zi, gammas[i]);
    }
    return y;
  };

  if (config.step_rule == StepRule::unit) return {candidate(1.0), 1.0};

  const double fx = f.value(x);
  double alpha = 1.0;
  for (int m = 0; m <= kBacktrackCap; ++m) {
    const Vector y = candidate(alpha);
    double required = 0.0;
    for (int i = 0; i < n; ++i) {
      const int off = P.blocks().offset(i);
      const int mi = P.blocks().dim(i);
      const Vector d = y.segment(off, mi) - x.segment(off, mi);
      required += d.dot(gamma_solvers[i].solve(d));
    }
    required *= config.sigma / alpha;
    if (fx - f.value(y) >= required) return {y, alpha};
    alpha *= config.beta;
  }
  throw BacktrackCapError("Armijo backtracking exceeded its cap in the synchronous step");
}

RandomStepResult random_step_ws(const ObjectiveModel& f, const Polyhedron& P,
                                const BlockWorkspace& ws, const SolverConfig& config,
                                const Vector& x, RngStream& rng) {
  const int n = P.blocks().n();
  const Vector pi = config.effective_pi(n);
  const int i = rng.next_index(pi);
  const ObjectiveModel g = coordinate_restriction(f, i, x);
  const Vector xi = x.segment(P.blocks().offset(i), P.blocks().dim(i));
  const BlockStepOut step =
      block_step(g, ws.sub[i], xi, slice_spec(config.scaling, P.blocks(), i), config);
  RandomStepResult out;
  out.block = i;
  out.next = x;
  out.next.segment(P.blocks().offset(i), P.blocks().dim(i)) = step.block_point;
  out.alpha = step.alpha;
  return out;
}

}  // namespace

SweepResult cyclic_sweep(const ObjectiveModel& f, const Polyhedron& P, const SolverConfig& config,
                         const Vector& x) {
  const BlockWorkspace ws = make_workspace(P);
  return cyclic_sweep_ws(f, P, ws, config, x);
}

StepResult jacobi_step(const ObjectiveModel& f, const Polyhedron& P, const SolverConfig& config,
                       const Vector& x) {
  const BlockWorkspace ws = make_workspace(P);
  return jacobi_step_ws(f, P, ws, config, x);
}

RandomStepResult random_step(const ObjectiveModel& f, const Polyhedron& P,
                             const SolverConfig& config, const Vector& x, RngStream& rng) {
  const BlockWorkspace ws = make_workspace(P);
  return random_step_ws(f, P, ws, config, x, rng);
}

IterateTrace run(const ObjectiveModel& f, const Polyhedron& P, const Vector& start,
                 const SolverConfig& config) {
  config.validate(P.blocks());
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&t0]() {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  Vector x = start;
  if (!contains(P, x, kActiveTol))
    x = scaled_project(P, x, ScalingMatrix::identity(P.blocks()));

  const BlockWorkspace ws = make_workspace(P);
  RngStream block_rng = RngStream(config.rng_seed).split(0);

  IterateTrace trace;
  auto record = [&](int k, const Vector& pt, double alpha, std::vector<double> block_alphas,
                    int block) {
    TraceRecord rec;
    rec.k = k;
    rec.point = pt;
    rec.f_value = f.value(pt);
    rec.residual = optimality_residual(f, P, pt);
    rec.alpha = alpha;
    rec.block_alphas = std::move(block_alphas);
    rec.block = block;
    rec.active = active_set(P, pt, kActiveTol).indices;
    rec.t_wall_ms = elapsed_ms();
    if (!std::isfinite(rec.f_value)) {
      std::ostringstream msg;
      msg << "objective became non-finite at step " << k << " (f = " << rec.f_value << ")";
      throw std::runtime_error(msg.str());
    }
    trace.records.push_back(std::move(rec));
  };

  record(0, x, 1.0, {}, -1);
  trace.converged = trace.records.back().residual <= config.stop_tol;

  for (int k = 1; k <= config.max_iters && !trace.converged; ++k) {
    switch (config.variant) {
      case Variant::centralized: {
        const StepResult s = centralized_step(f, P, config, x);
        x = s.next;
        record(k, x, s.alpha, {}, -1);
        break;
      }
      case Variant::cyclic: {
        const SweepResult s = cyclic_sweep_ws(f, P, ws, config, x);
        x = s.next;
        const double min_alpha =
            *std::min_element(s.block_alphas.begin(), s.block_alphas.end());
        record(k, x, min_alpha, s.block_alphas, -1);
        break;
      }
      case Variant::jacobi: {
        const StepResult s = jacobi_step_ws(f, P, ws, config, x);
        x = s.next;
        record(k, x, s.alpha, {}, -1);
        break;
      }
      case Variant::random_cd: {
        const RandomStepResult s = random_step_ws(f, P, ws, config, x, block_rng);
        x = s.next;
        record(k, x, s.alpha, {}, s.block);
        break;
      }
    }
    trace.converged = trace.records.back().residual <= config.stop_tol;
  }
  return trace;
}

}  // namespace polycd
