#include "polycd/projection.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace polycd {

ScalingMatrix ScalingMatrix::identity(const BlockStructure& blocks) {
  ScalingMatrix s;
  s.gamma = Matrix::Identity(blocks.total(), blocks.total());
  s.eig_lower = s.eig_upper = 1.0;
  s.block_diagonal = true;
  s.blocks = blocks;
  return s;
}

ScalingMatrix ScalingMatrix::from_diagonal(const Vector& d, const BlockStructure& blocks) {
  if (d.size() != blocks.total()) throw std::invalid_argument("diagonal length mismatch");
  if (d.minCoeff() <= 0) throw std::invalid_argument("scaling diagonal must be positive");
  ScalingMatrix s;
  s.gamma = d.asDiagonal();
  s.eig_lower = d.minCoeff();
  s.eig_upper = d.maxCoeff();
  s.block_diagonal = true;
  s.blocks = blocks;
  return s;
}

ScalingMatrix ScalingMatrix::newton_block(const Matrix& hessian, const BlockStructure& blocks) {
  constexpr double kEigFloor = 1e-8;
  constexpr double kEigCeil = 1e8;
  ScalingMatrix s;
  s.gamma = Matrix::Zero(blocks.total(), blocks.total());
  s.block_diagonal = true;
  s.blocks = blocks;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int i = 0; i < blocks.n(); ++i) {
    const int off = blocks.offset(i);
    const int mi = blocks.dim(i);
    Eigen::SelfAdjointEigenSolver<Matrix> es(hessian.block(off, off, mi, mi));
    Vector inv_eigs(mi);
    for (int k = 0; k < mi; ++k) {
      const double clamped = std::clamp(es.eigenvalues()[k], kEigFloor, kEigCeil);
      inv_eigs[k] = 1.0 / clamped;
      lo = std::min(lo, inv_eigs[k]);
      hi = std::max(hi, inv_eigs[k]);
    }
    s.gamma.block(off, off, mi, mi) =
        es.eigenvectors() * inv_eigs.asDiagonal() * es.eigenvectors().transpose();
  }
  s.eig_lower = lo;
  s.eig_upper = hi;
  return s;
}

Matrix ScalingMatrix::block(int i) const {
  return gamma.block(blocks.offset(i), blocks.offset(i), blocks.dim(i), blocks.dim(i));
}

namespace {

// Cyclic relaxation projections onto violated halfspaces. Only used to decide
// whether a stalled dual iteration faced an empty polyhedron.
bool phase_one_feasible(const Polyhedron& P, Vector y, double tol, int sweep_cap) {
  for (int sweep = 0; sweep < sweep_cap; ++sweep) {
    bool any = false;
    for (int j = 0; j < P.num_rows(); ++j) {
      const double viol = P.A().row(j).dot(y) - P.b()[j];
      if (viol > tol) {
        y -= P.A().row(j).transpose() * (viol / P.A().row(j).squaredNorm());
        any = true;
      }
    }
    if (!any) return true;
  }
  return false;
}

}  // namespace

ProjectionResult scaled_project_detailed(const Polyhedron& P, const Vector& z,
                                         const ScalingMatrix& gamma) {
  if (z.size() != P.ambient_dim()) throw std::invalid_argument("point dimension mismatch");
  const int p = P.num_rows();
  ProjectionResult out;
  out.iterations = 0;

  const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
  const double feas_tol = 1e-12 * scale;

  Vector violation = p > 0 ? Vector(P.A() * z - P.b()) : Vector();
  if (p == 0 || violation.maxCoeff() <= feas_tol) {
    out.point = z;
    out.multipliers = Vector::Zero(0);
    return out;
  }

  // Dual of the projection QP: minimize 0.5 zeta'M zeta - q'zeta over zeta >= 0
  // with M = A Gamma A', q = Az - b; then y = z - Gamma A' zeta. The working
  // set grows by the most violated row first (w = q at zeta = 0), ties by
  // lowest index; the complete orthogonal inner solve absorbs duplicated rows.
  const Matrix M = P.A() * gamma.gamma * P.A().transpose();
  const Vector& q = violation;

  const int cap = 50 * p;
  const double w_tol = 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff());

  Vector zeta = Vector::Zero(p);
  std::vector<bool> passive(p, false);
  std::vector<int> passive_idx;

  auto solve_passive = [&]() -> Vector {
    const int k = static_cast<int>(passive_idx.size());
    Matrix Mp(k, k);
    Vector qp(k);
    for (int r = 0; r < k; ++r) {
      qp[r] = q[passive_idx[r]];
      for (int c = 0; c < k; ++c) Mp(r, c) = M(passive_idx[r], passive_idx[c]);
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Mp);
    cod.setThreshold(1e-12);
    return cod.solve(qp);
  };

  bool optimal = false;
  while (out.iterations < cap) {
    ++out.iterations;
    const Vector w = q - M * zeta;
    int best = -1;
    double best_w = w_tol;
    for (int j = 0; j < p; ++j) {
      if (!passive[j] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) {
      optimal = true;
      break;
    }
    passive[best] = true;
    passive_idx.push_back(best);

    while (true) {
      const Vector zp = solve_passive();
      bool all_positive = true;
      for (int r = 0; r < static_cast<int>(passive_idx.size()); ++r)
        if (zp[r] <= 0.0) all_positive = false;
      if (all_positive) {
        for (int r = 0; r < static_cast<int>(passive_idx.size()); ++r)
          zeta[passive_idx[r]] = zp[r];
        break;
      }
      double t = std::numeric_limits<double>::infinity();
      for (int r = 0; r < static_cast<int>(passive_idx.size()); ++r) {
        if (zp[r] <= 0.0) {
          const double denom = zeta[passive_idx[r]] - zp[r];
          if (denom > 0) t = std::min(t, zeta[passive_idx[r]] / denom);
        }
      }
      if (!std::isfinite(t)) t = 0.0;
      std::vector<int> keep;
      for (int r = 0; r < static_cast<int>(passive_idx.size()); ++r) {
        const int j = passive_idx[r];
        zeta[j] += t * (zp[r] - zeta[j]);
        if (zeta[j] > 0.0) {
          keep.push_back(j);
        } else {
          zeta[j] = 0.0;
          passive[j] = false;
        }
      }
      passive_idx = std::move(keep);
      if (passive_idx.empty()) break;
      if (++out.iterations >= cap) break;
    }
  }

  if (!optimal) {
    if (!phase_one_feasible(P, z, kActiveTol, 200 * p)) {
      throw InfeasibleError("scaled_project: no feasible point found (polyhedron empty)");
    }
    std::ostringstream msg;
    msg << "scaled_project: dual active-set cap " << cap << " exceeded; p = " << p
        << ", residual violation = " << (P.A() * (z - gamma.gamma * P.A().transpose() * zeta) - P.b()).maxCoeff();
    throw IterationCapError(msg.str());
  }

  out.point = z - gamma.gamma * (P.A().transpose() * zeta);
  std::sort(passive_idx.begin(), passive_idx.end());
  out.active = passive_idx;
  out.multipliers = Vector(passive_idx.size());
  for (int r = 0; r < static_cast<int>(passive_idx.size()); ++r)
    out.multipliers[r] = zeta[passive_idx[r]];
  return out;
}

Vector scaled_project(const Polyhedron& P, const Vector& z, const ScalingMatrix& gamma) {
  return scaled_project_detailed(P, z, gamma).point;
}

Vector gp_candidate(const ObjectiveModel& f, const Polyhedron& P, const Vector& x,
                    const ScalingMatrix& gamma, double alpha) {
  if (alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("step size must lie in (0, 1]");
  const Vector z = x - alpha * (gamma.gamma * f.gradient(x));
  return scaled_project(P, z, gamma);
}

double optimality_residual(const ObjectiveModel& f, const Polyhedron& P, const Vector& x) {
  const Vector cand = gp_candidate(f, P, x, ScalingMatrix::identity(P.blocks()), 1.0);
  return (cand - x).norm();
}

}  // namespace polycd
