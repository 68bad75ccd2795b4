#include "polycd/stochastic_saa.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "polycd/rate_analysis.hpp"

namespace polycd {

SampleSchedule SampleSchedule::geometric(double q0, double gamma) {
  if (q0 < 1 || gamma <= 1) throw std::invalid_argument("need q0 >= 1 and gamma > 1");
  SampleSchedule s;
  s.rule = Rule::geometric;
  s.q0 = q0;
  s.growth = gamma;
  return s;
}

SampleSchedule SampleSchedule::linear(double q0, double c) {
  if (q0 < 1 || c <= 0) throw std::invalid_argument("need q0 >= 1 and c > 0");
  SampleSchedule s;
  s.rule = Rule::linear;
  s.q0 = q0;
  s.growth = c;
  return s;
}

int SampleSchedule::count(int k) const {
  if (k < 0) throw std::invalid_argument("outer step must be nonnegative");
  double q = 0;
  if (rule == Rule::geometric) {
    q = q0 * std::pow(growth, k);
  } else {
    q = q0 + growth * k;
  }
  return static_cast<int>(std::ceil(q - 1e-12));
}

ObjectiveModel saa_objective(const StochasticObjective& stoch,
                             const std::vector<Vector>& samples) {
  if (samples.empty()) throw std::invalid_argument("sample average needs at least one sample");
  auto shared = std::make_shared<std::vector<Vector>>(samples);
  const double inv_q = 1.0 / static_cast<double>(shared->size());

  ObjectiveModel f;
  f.blocks = stoch.blocks;
  auto g = stoch.measurement;
  auto dg = stoch.measurement_gradient;
  f.value = [shared, g, inv_q](const Vector& x) {
    double acc = 0.0;
    for (const auto& w : *shared) acc += g(x, w);
    return acc * inv_q;
  };
  f.gradient = [shared, dg, inv_q, m = stoch.dim()](const Vector& x) -> Vector {
    Vector acc = Vector::Zero(m);
    for (const auto& w : *shared) acc += dg(x, w);
    return acc * inv_q;
  };
  if (stoch.measurement_hessian) {
    auto d2g = stoch.measurement_hessian;
    f.hessian = [shared, d2g, inv_q, m = stoch.dim()](const Vector& x) -> Matrix {
      Matrix acc = Matrix::Zero(m, m);
      for (const auto& w : *shared) acc += d2g(x, w);
      return acc * inv_q;
    };
  }
  f.lipschitz_blocks = stoch.lipschitz_blocks;
  f.strong_convexity = stoch.strong_convexity;
  return f;
}

namespace {

// High-accuracy minimizer of one estimate: centralized Newton when a Hessian
// is available, identity-scaled Armijo gradient projection otherwise.
Vector minimize_estimate(const ObjectiveModel& f, const Polyhedron& P, const Vector& start) {
  SolverConfig cfg;
  cfg.variant = Variant::centralized;
  cfg.scaling = f.has_hessian() ? ScalingSpec::newton_block() : ScalingSpec::identity();
  cfg.step_rule = StepRule::armijo;
  cfg.stop_tol = 1e-12;
  cfg.max_iters = 200;
  // One ambient block: the centralized Newton map inverts the full Hessian.
  ObjectiveModel whole = f;
  whole.blocks = BlockStructure::single(f.dim());
  whole.lipschitz_blocks = {f.lipschitz_full()};
  const Polyhedron whole_P(P.A(), P.b(), BlockStructure::single(P.ambient_dim()));
  return run(whole, whole_P, start, cfg).last().point;
}

}  // namespace

SaaRunResult saa_sequential_run(const StochasticObjective& stoch, const SampleSchedule& schedule,
                                const SolverConfig& inner, const Polyhedron& P,
                                const Vector& start, int outer_steps, bool record_mu) {
  inner.validate(P.blocks());
  RngStream block_rng = RngStream(inner.rng_seed).split(0);
  RngStream sample_rng = RngStream(inner.rng_seed).split(1);

  SaaRunResult out;
  Vector x = start;
  if (!contains(P, x, kActiveTol))
    x = scaled_project(P, x, ScalingMatrix::identity(P.blocks()));

  auto push_record = [&](int k, const ObjectiveModel& fk, double alpha, int block) {
    TraceRecord rec;
    rec.k = k;
    rec.point = x;
    rec.f_value = fk.value(x);
    rec.residual = optimality_residual(fk, P, x);
    rec.alpha = alpha;
    rec.block = block;
    rec.active = active_set(P, x, kActiveTol).indices;
    out.trace.records.push_back(std::move(rec));
  };

  for (int k = 0; k < outer_steps; ++k) {
    const int q = schedule.count(k);
    std::vector<Vector> samples;
    samples.reserve(q);
    for (int l = 0; l < q; ++l) samples.push_back(stoch.sampler(sample_rng));
    const ObjectiveModel fk = saa_objective(stoch, samples);
    out.sample_counts.push_back(q);

    if (out.trace.records.empty()) push_record(0, fk, 1.0, -1);

    double alpha = 1.0;
    int block = -1;
    switch (inner.variant) {
      case Variant::centralized: {
        const StepResult s = centralized_step(fk, P, inner, x);
        x = s.next;
        alpha = s.alpha;
        break;
      }
      case Variant::cyclic: {
        const SweepResult s = cyclic_sweep(fk, P, inner, x);
        x = s.next;
        alpha = *std::min_element(s.block_alphas.begin(), s.block_alphas.end());
        break;
      }
      case Variant::jacobi: {
        const StepResult s = jacobi_step(fk, P, inner, x);
        x = s.next;
        alpha = s.alpha;
        break;
      }
      case Variant::random_cd: {
        const RandomStepResult s = random_step(fk, P, inner, x, block_rng);
        x = s.next;
        alpha = s.alpha;
        block = s.block;
        break;
      }
    }
    push_record(k + 1, fk, alpha, block);

    if (record_mu) out.mu_trace.push_back(minimize_estimate(fk, P, x));
  }
  return out;
}

Matrix delta_method_covariance(const Matrix& hessian_at_solution, const ReducedBasis& E,
                               const Matrix& gradient_covariance) {
  const Matrix Em = E.assemble();
  const int mt = static_cast<int>(Em.cols());
  if (mt == 0) return Matrix::Zero(Em.rows(), Em.rows());
  const Matrix H_red = Em.transpose() * hessian_at_solution * Em;
  Eigen::FullPivLU<Matrix> lu(H_red);
  if (!lu.isInvertible())
    throw std::invalid_argument("reduced Hessian is singular; the limit law is undefined");
  const Matrix pull = Em * lu.inverse() * Em.transpose();
  return pull * gradient_covariance * pull;
}

SaaDiagnostics saa_diagnostics(const std::vector<Vector>& mu_at_fixed_step, int sample_count,
                               const Vector& xstar, const Matrix& predicted_covariance,
                               const ReducedBasis& E) {
  const int trials = static_cast<int>(mu_at_fixed_step.size());
  if (trials < 100)
    throw std::invalid_argument("need at least 100 trials for covariance diagnostics");
  const int m = static_cast<int>(xstar.size());
  const double scale = std::sqrt(static_cast<double>(sample_count));

  Matrix scaled(m, trials);
  for (int t = 0; t < trials; ++t) scaled.col(t) = scale * (mu_at_fixed_step[t] - xstar);
  const Vector mean = scaled.rowwise().mean();
  Matrix centered = scaled.colwise() - mean;

  SaaDiagnostics diag;
  diag.trials = trials;
  diag.empirical_covariance = centered * centered.transpose() / (trials - 1.0);
  diag.predicted_covariance = predicted_covariance;
  const double denom = std::max(predicted_covariance.norm(), 1e-300);
  diag.frobenius_rel_error = (diag.empirical_covariance - predicted_covariance).norm() / denom;

  // Split the scaled errors into the reduced subspace and its complement.
  const Matrix Em = E.assemble();
  double free_sq = 0.0;
  double pinned_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector v = scaled.col(t);
    const Vector in_span = Em * (Em.transpose() * v);
    free_sq += in_span.squaredNorm();
    pinned_sq += (v - in_span).squaredNorm();
  }
  const double free_rms = std::sqrt(free_sq / trials);
  const double pinned_rms = std::sqrt(pinned_sq / trials);
  diag.pinned_to_free_rms_ratio = free_rms > 0 ? pinned_rms / free_rms : 0.0;
  return diag;
}

}  // namespace polycd
