#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "polycd/problem_io.hpp"
#include "polycd/rate_analysis.hpp"
#include "polycd/solvers.hpp"
#include "polycd/stochastic_saa.hpp"

namespace polycd {

/// Geometric decay factor exp(slope) of a log-linear fit of ||x^k - xstar||
/// over the window (fractions of the above-noise-floor prefix). Throws
/// WindowError on fewer than 5 usable points or data at the noise floor.
double empirical_rate(const IterateTrace& trace, const Vector& xstar, double window_start,
                      double window_end);

/// Same fit on the trial-averaged objective gap of an ensemble.
double empirical_f_rate(const std::vector<IterateTrace>& traces, double f_star,
                        double window_start, double window_end);

/// Deterministic per-trial seed derivation for ensembles.
std::uint64_t trial_seed(std::uint64_t base_seed, int trial);

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);
std::string scaling_name(const ScalingSpec& s);
ScalingSpec scaling_from_name(const std::string& name, int q = 0, const Vector& diag = Vector());

/// Independent solver runs with split seed streams. Results are identical for
/// the parallel (OpenMP) and serial paths; trials only differ in rng_seed.
std::vector<IterateTrace> run_ensemble(const ObjectiveModel& f, const Polyhedron& P,
                                       const Vector& start, const SolverConfig& base, int trials,
                                       bool parallel);

/// Reference solution: problem solution field when present, else a
/// high-accuracy centralized Newton solve.
Vector reference_solution(const Problem& problem);

struct CompareEntry {
  std::string variant;
  std::string scaling;
  double predicted_rho = 0.0;
  double empirical = 0.0;          // residual rate (deterministic), mean-f-gap rate (random)
  double relative_gap = 0.0;
  double empirical_f_rate = 0.0;   // cyclic only, vs predicted_rho^2
  bool has_empirical = false;
  bool identified = false;
  bool converged = false;
  int steps = 0;
  HypothesisFlags hypotheses;
};

/// Solve -> identify the active set -> build the reduced model -> predicted
/// rate per variant -> empirical rate over the tail window [0.6, 0.95].
nlohmann::ordered_json compare(const Problem& problem, const std::vector<SolverConfig>& configs,
                               int trials, std::vector<CompareEntry>* entries_out = nullptr);

/// Built-in problem families:
///   random_pd_quadratic: {"m", "blocks"?, "cond"?}        unconstrained
///   box_engineered:      {"m", "blocks"?, "cond"?, "active"?, "jacobi_safe"?}
///                        sign constraints, chosen active set binding with
///                        strict complementarity by construction
///   simplex:             {"m", "blocks"?, "cond"?, "active"?, "sum_active"?}
///                        per-block sign rows plus one sum row per block
Problem generate_problem(const std::string& family, const nlohmann::json& params,
                         std::uint64_t seed);

/// Serialized rate report (kind, reduced dim, rho, hypothesis flags, matrix).
nlohmann::ordered_json rate_report_to_json(const RateReport& report, bool include_matrix = true);

struct SaaExperiment {
  Problem problem;            // quadratic objective required
  Matrix noise_covariance;    // gradient noise: g(x, w) = f(x) + w'x, w ~ N(0, cov)
  SampleSchedule schedule;
  SolverConfig inner;
  int outer_steps = 1;
  int trials = 1;
  std::uint64_t seed = 0;
  bool record_mu = true;
};

SaaExperiment saa_experiment_from_json(const std::string& text);

/// Builds the noisy measurement family for an experiment.
StochasticObjective make_noisy_quadratic(const Problem& problem, const Matrix& noise_covariance);

/// Runs all trials (OpenMP across trials), writes per-trial trace CSVs under
/// out_dir (trace_000.csv, ...) and returns the aggregate report.
nlohmann::ordered_json run_saa_experiment(const SaaExperiment& exp, const std::string& out_dir,
                                          bool parallel = true);

}  // namespace polycd
