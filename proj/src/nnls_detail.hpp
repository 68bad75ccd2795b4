#pragma once

// Shared active-set NNLS core: minimize 0.5 z'Mz - q'z over z >= 0, M PSD.
// Used by the KKT multiplier fit and by the dual of the projection QP.

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace polycd::detail {

struct NnlsResult {
  Eigen::VectorXd z;
  bool converged = false;
  int iterations = 0;
};

// Classical Lawson-Hanson style iteration on the quadratic form. The inner
// least-squares solve uses a complete orthogonal decomposition so rank
// deficiency (duplicated rows) yields the minimum-norm multiplier split.
inline NnlsResult nnls_quadratic(const Eigen::MatrixXd& M, const Eigen::VectorXd& q,
                                 int iteration_cap) {
  const int p = static_cast<int>(q.size());
  NnlsResult out;
  out.z = Eigen::VectorXd::Zero(p);
  if (p == 0) {
    out.converged = true;
    return out;
  }

  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;

  std::vector<bool> passive(p, false);
  std::vector<int> passive_idx;

  auto solve_passive = [&](void) -> Eigen::VectorXd {
    const int k = static_cast<int>(passive_idx.size());
    Eigen::MatrixXd Mp(k, k);
    Eigen::VectorXd qp(k);
    for (int r = 0; r < k; ++r) {
      qp[r] = q[passive_idx[r]];
      for (int c = 0; c < k; ++c) Mp(r, c) = M(passive_idx[r], passive_idx[c]);
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Mp);
    cod.setThreshold(1e-12);
    return cod.solve(qp);
  };

  for (int it = 0; it < iteration_cap; ++it) {
    out.iterations = it + 1;
    // w = -grad = q - Mz; pick the most positive entry outside the passive set,
    // ties broken by lowest index.
    const Eigen::VectorXd w = q - M * out.z;
    int best = -1;
    double best_w = tol;
    for (int j = 0; j < p; ++j) {
      if (!passive[j] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) {
      out.converged = true;
      return out;
    }
    passive[best] = true;
    passive_idx.push_back(best);

    // Inner loop: restore nonnegativity by partial steps.
    while (true) {
      const Eigen::VectorXd zp = solve_passive();
      bool all_positive = true;
      for (int r = 0; r < static_cast<int>(passive_idx.size()); ++r)
        if (zp[r] <= tol) all_positive = false;
      if (all_positive) {
        for (int r = 0; r < static_cast<int>(passive_idx.size()); ++r)
          out.z[passive_idx[r]] = zp[r];
        break;
      }
      double t = std::numeric_limits<double>::infinity();
      for (int r = 0; r < static_cast<int>(passive_idx.size()); ++r) {
        if (zp[r] <= tol) {
          const double zi = out.z[passive_idx[r]];
          const double denom = zi - zp[r];
          if (denom > 0) t = std::min(t, zi / denom);
        }
      }
      if (!std::isfinite(t)) t = 0.0;
      std::vector<int> keep;
      for (int r = 0; r < static_cast<int>(passive_idx.size()); ++r) {
        const int j = passive_idx[r];
        out.z[j] += t * (zp[r] - out.z[j]);
        if (out.z[j] > tol) {
          keep.push_back(j);
        } else {
          out.z[j] = 0.0;
          passive[j] = false;
        }
      }
      passive_idx = std::move(keep);
      if (passive_idx.empty()) break;
      if (++out.iterations >= iteration_cap) return out;
    }
  }
  return out;
}

}  // namespace polycd::detail
