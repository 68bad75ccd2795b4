#include "polycd/experiments.hpp"

#include <omp.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace polycd {

using json = nlohmann::ordered_json;

namespace {

double fit_decay(const std::vector<double>& values, double window_start, double window_end,
                 double floor, const char* what) {
  int usable = 0;
  while (usable < static_cast<int>(values.size()) && values[usable] > floor) ++usable;
  if (usable < 5)
    throw WindowError(std::string(what) + ": fewer than 5 points above the noise floor");
  int i0 = static_cast<int>(std::floor(window_start * (usable - 1)));
  int i1 = static_cast<int>(std::ceil(window_end * (usable - 1)));
  i0 = std::clamp(i0, 0, usable - 1);
  i1 = std::clamp(i1, 0, usable - 1);
  if (i1 - i0 + 1 < 5) throw WindowError(std::string(what) + ": window shorter than 5 points");

  // Least-squares slope of log(value) against the step index.
  const int count = i1 - i0 + 1;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = i0; k <= i1; ++k) {
    const double y = std::log(values[k]);
    sx += k;
    sy += y;
    sxx += static_cast<double>(k) * k;
    sxy += k * y;
  }
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return std::exp(slope);
}

}  // namespace

double empirical_rate(const IterateTrace& trace, const Vector& xstar, double window_start,
                      double window_end) {
  std::vector<double> r;
  r.reserve(trace.records.size());
  for (const auto& rec : trace.records) r.push_back((rec.point - xstar).norm());
  const double floor = 100.0 * std::numeric_limits<double>::epsilon();
  return fit_decay(r, window_start, window_end, floor, "empirical_rate");
}

double empirical_f_rate(const std::vector<IterateTrace>& traces, double f_star,
                        double window_start, double window_end) {
  if (traces.empty()) throw std::invalid_argument("empirical_f_rate: empty ensemble");
  size_t len = traces.front().records.size();
  for (const auto& t : traces) len = std::min(len, t.records.size());
  std::vector<double> gap(len, 0.0);
  for (const auto& t : traces)
    for (size_t k = 0; k < len; ++k) gap[k] += t.records[k].f_value - f_star;
  for (auto& g : gap) g /= static_cast<double>(traces.size());
  const double floor =
      100.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f_star));
  return fit_decay(gap, window_start, window_end, floor, "empirical_f_rate");
}

std::uint64_t trial_seed(std::uint64_t base_seed, int trial) {
  return RngStream(base_seed).split(0x747269616cull + static_cast<std::uint64_t>(trial)).next_u64();
}

std::vector<IterateTrace> run_ensemble(const ObjectiveModel& f, const Polyhedron& P,
                                       const Vector& start, const SolverConfig& base, int trials,
                                       bool parallel) {
  std::vector<IterateTrace> out(trials);
  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int t = 0; t < trials; ++t) {
    try {
      SolverConfig cfg = base;
      cfg.rng_seed = trial_seed(base.rng_seed, t);
      out[t] = run(f, P, start, cfg);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Vector reference_solution(const Problem& problem) {
  if (problem.solution) return *problem.solution;
  const ObjectiveModel f = problem.make_objective();
  ObjectiveModel whole = f;
  whole.blocks = BlockStructure::single(f.dim());
  whole.lipschitz_blocks = {f.lipschitz_full()};
  Polyhedron P = problem.A.rows() == 0
                     ? Polyhedron::unconstrained(whole.blocks)
                     : Polyhedron(problem.A, problem.b, whole.blocks);
  SolverConfig cfg;
  cfg.variant = Variant::centralized;
  cfg.scaling = f.has_hessian() ? ScalingSpec::newton_block() : ScalingSpec::identity();
  cfg.stop_tol = 1e-12;
  cfg.max_iters = f.has_hessian() ? 500 : 20000;
  return run(whole, P, problem.start, cfg).last().point;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::centralized: return "centralized";
    case Variant::cyclic: return "cyclic";
    case Variant::jacobi: return "jacobi";
    case Variant::random_cd: return "random";
  }
  return "unknown";
}

Variant variant_from_name(const std::string& name) {
  if (name == "centralized") return Variant::centralized;
  if (name == "cyclic") return Variant::cyclic;
  if (name == "jacobi") return Variant::jacobi;
  if (name == "random") return Variant::random_cd;
  throw std::invalid_argument("unknown variant: " + name);
}

std::string scaling_name(const ScalingSpec& s) {
  switch (s.kind) {
    case ScalingSpec::Kind::identity: return "identity";
    case ScalingSpec::Kind::fixed_diagonal: return "fixed-diagonal";
    case ScalingSpec::Kind::newton_block: return "newton-block";
    case ScalingSpec::Kind::newton_taylor:
      return "newton-taylor(" + std::to_string(s.order) + ")";
  }
  return "unknown";
}

ScalingSpec scaling_from_name(const std::string& name, int q, const Vector& diag) {
  if (name == "identity") return ScalingSpec::identity();
  if (name == "newton-block") return ScalingSpec::newton_block();
  if (name == "newton-taylor") return ScalingSpec::newton_taylor(q);
  if (name == "fixed-diagonal") {
    if (diag.size() == 0)
      throw std::invalid_argument("fixed-diagonal scaling needs diagonal values");
    return ScalingSpec::fixed_diagonal(diag);
  }
  throw std::invalid_argument("unknown scaling: " + name);
}

namespace {

json hypotheses_to_json(const HypothesisFlags& h) {
  json j;
  j["strict_complementarity"] = h.strict_complementarity;
  j["hessian_pd"] = h.hessian_pd;
  j["efficiency"] = h.efficiency;
  j["ostrowski"] = h.ostrowski;
  j["regularized"] = h.regularized;
  return j;
}

}  // namespace

nlohmann::ordered_json rate_report_to_json(const RateReport& report, bool include_matrix) {
  json j;
  j["kind"] = rate_kind_name(report.kind);
  j["reduced_dim"] = report.reduced_dim;
  j["rho"] = report.spectral_radius;
  if (report.block >= 0) j["block"] = report.block;
  if (report.order >= 0) j["q"] = report.order;
  j["hypotheses"] = hypotheses_to_json(report.hypotheses);
  if (include_matrix && report.matrix) {
    json rows = json::array();
    for (int r = 0; r < report.matrix->rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < report.matrix->cols(); ++c) row.push_back((*report.matrix)(r, c));
      rows.push_back(std::move(row));
    }
    j["matrix"] = std::move(rows);
  }
  return j;
}

nlohmann::ordered_json compare(const Problem& problem, const std::vector<SolverConfig>& configs,
                               int trials, std::vector<CompareEntry>* entries_out) {
  const ObjectiveModel f = problem.make_objective();
  const Polyhedron P = problem.make_polyhedron();
  const Vector xstar = reference_solution(problem);
  const double f_star = f.value(xstar);
  const ActiveSet S = active_set(P, xstar, kActiveTol);
  const ReducedBasis E = reduced_basis(P, S);
  const Vector g_star = f.gradient(xstar);
  const StrictComplementarity sc = strict_complementarity(P, S, g_star);
  const Matrix H = f.hessian_at(xstar);

  json report;
  report["m"] = problem.m();
  report["blocks"] = problem.blocks.dims();
  report["solution_source"] = problem.solution ? "analytic" : "solved";
  report["active_set"] = S.indices;
  report["reduced_dim"] = E.reduced_total();
  report["strict_complementarity"] = sc.holds;
  json entries = json::array();

  for (const auto& config : configs) {
    config.validate(problem.blocks);
    CompareEntry entry;
    entry.variant = variant_name(config.variant);
    entry.scaling = scaling_name(config.scaling);

    const ScalingMatrix gamma_star = evaluate_scaling(config.scaling, f, xstar);
    const ReducedModel rm = reduce(H, gamma_star, E);
    Matrix D_star = Matrix::Zero(problem.m(), problem.m());
    for (int i = 0; i < problem.blocks.n(); ++i) {
      const int off = problem.blocks.offset(i);
      const int mi = problem.blocks.dim(i);
      D_star.block(off, off, mi, mi) = H.block(off, off, mi, mi);
    }
    const EfficiencyFlags eff = efficiency_conditions(gamma_star, D_star, config.sigma, rm);

    RateReport predicted;
    switch (config.variant) {
      case Variant::cyclic:
        predicted = cyclic_rate(rm);
        break;
      case Variant::jacobi:
      case Variant::centralized:
        predicted = jacobi_rate(rm);
        break;
      case Variant::random_cd:
        predicted = random_rate_f(rm, config.effective_pi(problem.blocks.n()));
        break;
    }
    entry.predicted_rho = predicted.spectral_radius;
    entry.hypotheses = predicted.hypotheses;
    entry.hypotheses.strict_complementarity = sc.holds;
    entry.hypotheses.efficiency = eff.efficiency;
    entry.hypotheses.ostrowski = eff.ostrowski;
    entry.hypotheses.hessian_pd =
        Eigen::SelfAdjointEigenSolver<Matrix>(H).eigenvalues().minCoeff() > 0;

    const ActiveSet S_star = S;
    if (config.variant == Variant::random_cd) {
      const auto traces = run_ensemble(f, P, problem.start, config, std::max(trials, 1), true);
      entry.steps = traces.front().steps();
      entry.converged = true;
      entry.identified = traces.front().last().active == S_star.indices;
      try {
        // Expected objective gap decays with the predicted random rate.
        entry.empirical = empirical_f_rate(traces, f_star, 0.5, 0.95);
        entry.has_empirical = true;
      } catch (const WindowError&) {
        entry.has_empirical = false;
      }
    } else {
      const IterateTrace trace = run(f, P, problem.start, config);
      entry.steps = trace.steps();
      entry.converged = trace.converged;
      entry.identified = trace.last().active == S_star.indices;
      try {
        entry.empirical = empirical_rate(trace, xstar, 0.6, 0.95);
        entry.has_empirical = true;
      } catch (const WindowError&) {
        entry.has_empirical = false;  // e.g. Newton termination in a couple of steps
      }
      if (config.variant == Variant::cyclic && entry.has_empirical) {
        try {
          entry.empirical_f_rate = empirical_f_rate({trace}, f_star, 0.6, 0.95);
        } catch (const WindowError&) {
          entry.empirical_f_rate = 0.0;
        }
      }
    }
    if (entry.has_empirical)
      entry.relative_gap =
          std::abs(entry.empirical - entry.predicted_rho) / std::max(entry.predicted_rho, 1e-12);

    json je;
    je["variant"] = entry.variant;
    je["scaling"] = entry.scaling;
    je["predicted_rho"] = entry.predicted_rho;
    if (entry.has_empirical) {
      je["empirical_rate"] = entry.empirical;
      je["relative_gap"] = entry.relative_gap;
    }
    if (entry.empirical_f_rate > 0) je["empirical_f_rate"] = entry.empirical_f_rate;
    je["steps"] = entry.steps;
    je["converged"] = entry.converged;
    je["identified"] = entry.identified;
    je["hypotheses"] = hypotheses_to_json(entry.hypotheses);
    entries.push_back(std::move(je));
    if (entries_out) entries_out->push_back(entry);
  }
  report["entries"] = std::move(entries);
  report["trials"] = trials;
  return report;
}

namespace {

Matrix random_orthogonal(int m, RngStream& rng) {
  Matrix G(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) G(r, c) = rng.next_normal();
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < m; ++i)
    if (R(i, i) < 0) Q.col(i) = -Q.col(i);
  return Q;
}

Matrix random_spd(int m, double cond, RngStream& rng) {
  Vector eigs(m);
  eigs[0] = 1.0;
  if (m > 1) eigs[m - 1] = cond;
  for (int i = 1; i + 1 < m; ++i)
    eigs[i] = std::exp(rng.next_uniform(0.0, std::log(std::max(cond, 1.0 + 1e-12))));
  const Matrix V = random_orthogonal(m, rng);
  return V * eigs.asDiagonal() * V.transpose();
}

std::vector<int> default_blocks(const json& params, int m) {
  if (params.contains("blocks")) return params.at("blocks").get<std::vector<int>>();
  return std::vector<int>(m, 1);
}

std::vector<int> pick_active(int m, int count, RngStream& rng) {
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  for (int i = m - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  count = std::clamp(count, 0, m - 1);  // keep at least one free coordinate
  std::vector<int> active(order.begin(), order.begin() + count);
  std::sort(active.begin(), active.end());
  return active;
}

double jacobi_radius_at(const Problem& p) {
  const ObjectiveModel f = p.make_objective();
  const Polyhedron P = p.make_polyhedron();
  const ActiveSet S = active_set(P, *p.solution, kActiveTol);
  const ReducedBasis E = reduced_basis(P, S);
  const Matrix H = f.hessian_at(*p.solution);
  const ScalingMatrix gamma = ScalingMatrix::newton_block(H, p.blocks);
  return jacobi_rate(reduce(H, gamma, E)).spectral_radius;
}

Problem build_box_engineered(const json& params, std::uint64_t seed) {
  RngStream rng(seed);
  const int m = params.at("m").get<int>();
  const double cond = params.value("cond", 10.0);
  const int active_count = params.value("active", std::max(1, m / 3));
  const bool jacobi_safe = params.value("jacobi_safe", true);

  Problem p;
  p.blocks = BlockStructure(default_blocks(params, m));
  Matrix Q = random_spd(m, cond, rng);
  const std::vector<int> active = pick_active(m, active_count, rng);

  Vector xstar = Vector::Zero(m);
  std::vector<bool> pinned(m, false);
  for (int j : active) pinned[j] = true;
  for (int j = 0; j < m; ++j)
    if (!pinned[j]) xstar[j] = rng.next_uniform(0.5, 1.5);
  Vector zeta(static_cast<int>(active.size()));
  for (int r = 0; r < zeta.size(); ++r) zeta[r] = rng.next_uniform(0.5, 1.5);

  // Sign constraints -x_j <= 0; multipliers back out the linear term so the
  // chosen active set binds with strict complementarity.
  Matrix A = -Matrix::Identity(m, m);
  Vector b = Vector::Zero(m);

  auto finish = [&](const Matrix& Qf) {
    Vector c = -(Qf * xstar);
    for (int r = 0; r < static_cast<int>(active.size()); ++r) c[active[r]] += zeta[r];
    Problem out;
    out.blocks = p.blocks;
    out.objective.kind = ObjectiveSpec::Kind::quadratic;
    out.objective.Q = Qf;
    out.objective.c = c;
    out.A = A;
    out.b = b;
    out.start = xstar;
    for (int j = 0; j < m; ++j) out.start[j] += rng.next_uniform(0.25, 1.0);
    out.solution = xstar;
    out.notes = "box_engineered seed=" + std::to_string(seed);
    return out;
  };

  Problem out = finish(Q);
  if (jacobi_safe) {
    for (int attempt = 0; attempt < 40 && jacobi_radius_at(out) > 0.9; ++attempt) {
      Q.diagonal() *= 1.3;
      // restart from the same draws; only the curvature changes
      Problem retry = finish(Q);
      retry.start = out.start;
      out = std::move(retry);
    }
  }
  return out;
}

Problem build_random_pd(const json& params, std::uint64_t seed) {
  RngStream rng(seed);
  const int m = params.at("m").get<int>();
  const double cond = params.value("cond", 10.0);
  Problem p;
  p.blocks = BlockStructure(default_blocks(params, m));
  p.objective.kind = ObjectiveSpec::Kind::quadratic;
  p.objective.Q = random_spd(m, cond, rng);
  p.objective.c = rng.next_normal_vector(m);
  p.A = Matrix::Zero(0, m);
  p.b = Vector::Zero(0);
  QuadraticObjective q{p.objective.Q, p.objective.c};
  p.solution = q.unconstrained_minimizer();
  p.start = *p.solution + rng.next_normal_vector(m);
  p.notes = "random_pd_quadratic seed=" + std::to_string(seed);
  return p;
}

Problem build_simplex(const json& params, std::uint64_t seed) {
  RngStream rng(seed);
  const int m = params.at("m").get<int>();
  const double cond = params.value("cond", 10.0);
  const bool sum_active = params.value("sum_active", true);
  Problem p;
  p.blocks = BlockStructure(default_blocks(params, m));
  const int n = p.blocks.n();
  const Matrix Q = random_spd(m, cond, rng);

  const int sign_active_count = params.value("active", std::max(1, m / 4));
  std::vector<int> sign_active = pick_active(m, sign_active_count, rng);
  std::vector<bool> pinned(m, false);
  for (int j : sign_active) pinned[j] = true;
  // Block 0 must keep free coordinates to carry an active sum row.
  if (sum_active) {
    bool all_pinned = true;
    for (int j = 0; j < p.blocks.dim(0); ++j)
      if (!pinned[p.blocks.offset(0) + j]) all_pinned = false;
    if (all_pinned) {
      pinned[p.blocks.offset(0)] = false;
      sign_active.erase(std::remove(sign_active.begin(), sign_active.end(), p.blocks.offset(0)),
                        sign_active.end());
    }
  }

  // Rows: m sign constraints, then one sum row per block.
  Matrix A = Matrix::Zero(m + n, m);
  Vector b = Vector::Zero(m + n);
  A.topLeftCorner(m, m) = -Matrix::Identity(m, m);
  for (int i = 0; i < n; ++i) {
    A.row(m + i).segment(p.blocks.offset(i), p.blocks.dim(i)).setOnes();
    b[m + i] = 1.0;
  }

  Vector xstar = Vector::Zero(m);
  for (int i = 0; i < n; ++i) {
    std::vector<int> free_here;
    for (int j = 0; j < p.blocks.dim(i); ++j)
      if (!pinned[p.blocks.offset(i) + j]) free_here.push_back(p.blocks.offset(i) + j);
    if (free_here.empty()) continue;
    if (i == 0 && sum_active) {
      for (int j : free_here) xstar[j] = 1.0 / static_cast<double>(free_here.size());
    } else {
      const double budget = rng.next_uniform(0.2, 0.8);
      for (int j : free_here)
        xstar[j] = budget / static_cast<double>(free_here.size());
    }
  }

  std::vector<int> active_rows = sign_active;
  if (sum_active) active_rows.push_back(m);  // block-0 sum row
  Vector zeta(static_cast<int>(active_rows.size()));
  for (int r = 0; r < zeta.size(); ++r) zeta[r] = rng.next_uniform(0.5, 1.5);

  Vector c = -(Q * xstar);
  for (int r = 0; r < static_cast<int>(active_rows.size()); ++r)
    c -= zeta[r] * A.row(active_rows[r]).transpose();

  p.objective.kind = ObjectiveSpec::Kind::quadratic;
  p.objective.Q = Q;
  p.objective.c = c;
  p.A = A;
  p.b = b;
  p.solution = xstar;
  p.start = Vector::Zero(m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p.blocks.dim(i); ++j)
      p.start[p.blocks.offset(i) + j] = 0.9 / static_cast<double>(p.blocks.dim(i) + 1);
  p.notes = "simplex seed=" + std::to_string(seed);
  return p;
}

}  // namespace

Problem generate_problem(const std::string& family, const json& params, std::uint64_t seed) {
  if (family == "random_pd_quadratic") return build_random_pd(params, seed);
  if (family == "box_engineered") return build_box_engineered(params, seed);
  if (family == "simplex") return build_simplex(params, seed);
  throw std::invalid_argument("unknown problem family: " + family);
}

StochasticObjective make_noisy_quadratic(const Problem& problem, const Matrix& noise_covariance) {
  if (problem.objective.kind != ObjectiveSpec::Kind::quadratic)
    throw std::invalid_argument("noisy family needs a quadratic objective");
  const int m = problem.m();
  if (noise_covariance.rows() != m || noise_covariance.cols() != m)
    throw std::invalid_argument("noise covariance dimension mismatch");

  Eigen::SelfAdjointEigenSolver<Matrix> es(noise_covariance);
  if (es.eigenvalues().minCoeff() < -1e-12)
    throw std::invalid_argument("noise covariance must be positive semidefinite");
  const Matrix half = es.operatorSqrt();

  const Matrix Q = problem.objective.Q;
  const Vector c = problem.objective.c;

  StochasticObjective stoch;
  stoch.blocks = problem.blocks;
  stoch.sampler = [half, m](RngStream& rng) -> Vector { return half * rng.next_normal_vector(m); };
  stoch.measurement = [Q, c](const Vector& x, const Vector& w) {
    return 0.5 * x.dot(Q * x) + c.dot(x) + w.dot(x);
  };
  stoch.measurement_gradient = [Q, c](const Vector& x, const Vector& w) -> Vector {
    return Q * x + c + w;
  };
  stoch.measurement_hessian = [Q](const Vector&, const Vector&) -> Matrix { return Q; };
  for (int i = 0; i < problem.blocks.n(); ++i)
    stoch.lipschitz_blocks.push_back(Q.block(problem.blocks.offset(i), problem.blocks.offset(i),
                                             problem.blocks.dim(i), problem.blocks.dim(i)));
  Eigen::SelfAdjointEigenSolver<Matrix> esq(Q);
  if (esq.eigenvalues().minCoeff() > 1e-12) stoch.strong_convexity = Q;
  stoch.true_objective = problem.make_objective();
  const Matrix cov = noise_covariance;
  stoch.gradient_covariance_at = [cov](const Vector&) -> Matrix { return cov; };
  return stoch;
}

SaaExperiment saa_experiment_from_json(const std::string& text) {
  const json j = json::parse(text);
  SaaExperiment exp;
  exp.problem = problem_from_json(j.at("problem").dump());

  const json& noise = j.at("noise");
  const json& cov = noise.at("cov");
  const int m = exp.problem.m();
  exp.noise_covariance = Matrix::Zero(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) exp.noise_covariance(r, c) = cov.at(r).at(c).get<double>();

  const json& sched = j.at("schedule");
  const std::string rule = sched.at("rule").get<std::string>();
  if (rule == "geometric")
    exp.schedule = SampleSchedule::geometric(sched.at("q0").get<double>(),
                                             sched.at("growth").get<double>());
  else if (rule == "linear")
    exp.schedule =
        SampleSchedule::linear(sched.at("q0").get<double>(), sched.at("growth").get<double>());
  else
    throw std::invalid_argument("unknown schedule rule: " + rule);
  exp.outer_steps = sched.at("steps").get<int>();

  const json& inner = j.at("inner");
  exp.inner.variant = variant_from_name(inner.at("variant").get<std::string>());
  exp.inner.scaling = scaling_from_name(inner.value("scaling", "newton-block"),
                                        inner.value("q", 0), Vector());
  exp.inner.beta = inner.value("beta", 0.5);
  exp.inner.sigma = inner.value("sigma", 0.25);
  if (inner.contains("pi")) {
    const auto pi = inner.at("pi").get<std::vector<double>>();
    exp.inner.pi = Eigen::Map<const Vector>(pi.data(), static_cast<int>(pi.size()));
  }
  exp.trials = j.value("trials", 1);
  exp.seed = j.value("seed", 0ull);
  exp.record_mu = j.value("record_mu", true);
  return exp;
}

nlohmann::ordered_json run_saa_experiment(const SaaExperiment& exp, const std::string& out_dir,
                                          bool parallel) {
  std::filesystem::create_directories(out_dir);
  const StochasticObjective stoch = make_noisy_quadratic(exp.problem, exp.noise_covariance);
  const Polyhedron P = exp.problem.make_polyhedron();

  std::vector<SaaRunResult> results(exp.trials);
  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int t = 0; t < exp.trials; ++t) {
    try {
      SolverConfig inner = exp.inner;
      inner.rng_seed = trial_seed(exp.seed, t);
      results[t] = saa_sequential_run(stoch, exp.schedule, inner, P, exp.problem.start,
                                      exp.outer_steps, exp.record_mu);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (int t = 0; t < exp.trials; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "trace_%03d.csv", t);
    write_trace_csv((std::filesystem::path(out_dir) / name).string(), results[t].trace,
                    exp.problem.m());
  }

  const Vector xstar = reference_solution(exp.problem);
  const ObjectiveModel f = exp.problem.make_objective();
  const ActiveSet S = active_set(P, xstar, kActiveTol);
  const ReducedBasis E = reduced_basis(P, S);
  const Matrix C_pred =
      delta_method_covariance(f.hessian_at(xstar), E, exp.noise_covariance);

  json report;
  report["trials"] = exp.trials;
  report["outer_steps"] = exp.outer_steps;
  report["sample_counts"] = results.empty() ? std::vector<int>{} : results[0].sample_counts;

  // RMS of ||x^k - xstar|| against q(k)^{-1/2}: the sampling-noise bottleneck.
  json rms_rows = json::array();
  for (int k = 0; k <= exp.outer_steps; ++k) {
    double acc = 0.0;
    for (const auto& r : results) acc += (r.trace.records[k].point - xstar).squaredNorm();
    const double rms = std::sqrt(acc / exp.trials);
    json row;
    row["k"] = k;
    const int q = k == 0 ? results[0].sample_counts[0] : results[0].sample_counts[k - 1];
    row["q"] = q;
    row["rms_error"] = rms;
    row["rms_times_sqrt_q"] = rms * std::sqrt(static_cast<double>(q));
    rms_rows.push_back(std::move(row));
  }
  report["error_vs_sample_size"] = std::move(rms_rows);

  if (exp.record_mu && exp.trials >= 100) {
    std::vector<Vector> mu_last;
    mu_last.reserve(exp.trials);
    for (const auto& r : results) mu_last.push_back(r.mu_trace.back());
    const int q_last = results[0].sample_counts.back();
    const SaaDiagnostics diag = saa_diagnostics(mu_last, q_last, xstar, C_pred, E);
    json jd;
    jd["q"] = q_last;
    jd["frobenius_rel_error"] = diag.frobenius_rel_error;
    jd["pinned_to_free_rms_ratio"] = diag.pinned_to_free_rms_ratio;
    json emp = json::array();
    json pred = json::array();
    for (int r = 0; r < diag.empirical_covariance.rows(); ++r) {
      json er = json::array(), pr = json::array();
      for (int c = 0; c < diag.empirical_covariance.cols(); ++c) {
        er.push_back(diag.empirical_covariance(r, c));
        pr.push_back(diag.predicted_covariance(r, c));
      }
      emp.push_back(std::move(er));
      pred.push_back(std::move(pr));
    }
    jd["empirical_covariance"] = std::move(emp);
    jd["predicted_covariance"] = std::move(pred);
    report["delta_method"] = std::move(jd);
  }

  std::ofstream out(std::filesystem::path(out_dir) / "report.json");
  out << report.dump(2) << "\n";
  return report;
}

}  // namespace polycd
