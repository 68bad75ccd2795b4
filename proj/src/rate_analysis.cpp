#include "polycd/rate_analysis.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

namespace polycd {

int ReducedModel::block_offset(int i) const {
  int off = 0;
  for (int k = 0; k < i; ++k) off += reduced_dims[k];
  return off;
}

std::string rate_kind_name(RateKind k) {
  switch (k) {
    case RateKind::cyclic: return "cyclic";
    case RateKind::jacobi: return "jacobi";
    case RateKind::shrinkage: return "shrinkage";
    case RateKind::random_f: return "random_f";
    case RateKind::random_supernorm: return "random_supernorm";
    case RateKind::newton_taylor: return "newton_taylor";
    case RateKind::lemma1_linear: return "lemma1_linear";
    case RateKind::lemma1_sublinear: return "lemma1_sublinear";
  }
  return "unknown";
}

double spectral_radius(const Matrix& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("spectral_radius: matrix not square");
  if (M.rows() > 512) throw std::invalid_argument("spectral_radius: dimension exceeds 512");
  if (!M.allFinite()) throw std::invalid_argument("spectral_radius: non-finite entries");
  const int n = static_cast<int>(M.rows());
  if (n == 0) return 0.0;

  Eigen::RealSchur<Matrix> schur(M, /*computeU=*/false);
  if (schur.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "spectral_radius: Schur iteration failed to converge (n = " << n
        << ", ||M|| = " << M.norm() << ")";
    throw IterationCapError(msg.str());
  }
  const Matrix& T = schur.matrixT();
  double rho = 0.0;
  int i = 0;
  while (i < n) {
    if (i + 1 < n && T(i + 1, i) != 0.0) {
      // 2x2 block holding a complex pair; |lambda|^2 equals its determinant.
      const double det = T(i, i) * T(i + 1, i + 1) - T(i, i + 1) * T(i + 1, i);
      rho = std::max(rho, std::sqrt(std::abs(det)));
      i += 2;
    } else {
      rho = std::max(rho, std::abs(T(i, i)));
      i += 1;
    }
  }
  return rho;
}

ReducedModel reduce(const Matrix& hessian, const ScalingMatrix& gamma, const ReducedBasis& E) {
  const int m = static_cast<int>(hessian.rows());
  if (hessian.cols() != m || gamma.dim() != m || E.blocks.total() != m)
    throw std::invalid_argument("reduce: inconsistent dimensions");

  ReducedModel rm;
  rm.reduced_dims = E.reduced_dims;
  const int mt = E.reduced_total();
  const Matrix Em = E.assemble();
  rm.hessian = Em.transpose() * hessian * Em;

  // Reduced scaling assembled per block when the scaling is tagged
  // block-diagonal, as a single congruence otherwise.
  rm.scaling = Matrix::Zero(mt, mt);
  if (gamma.block_diagonal && gamma.blocks.n() == E.blocks.n()) {
    int col = 0;
    for (int i = 0; i < E.blocks.n(); ++i) {
      const int mti = E.reduced_dims[i];
      if (mti > 0) {
        const Matrix Gi = gamma.block(i);
        const Matrix Ei = E.block_bases[i];
        rm.scaling.block(col, col, mti, mti) =
            (Ei.transpose() * Gi.ldlt().solve(Ei)).ldlt().solve(Matrix::Identity(mti, mti));
      }
      col += mti;
    }
  } else if (mt > 0) {
    rm.scaling = (Em.transpose() * gamma.gamma.ldlt().solve(Em))
                     .ldlt()
                     .solve(Matrix::Identity(mt, mt));
  }

  // Split H~ = D~ - L~ - L~' by copying blocks, so reassembly is exact.
  rm.diag_part = Matrix::Zero(mt, mt);
  rm.lower_part = Matrix::Zero(mt, mt);
  int roff = 0;
  for (int bi = 0; bi < rm.n_blocks(); ++bi) {
    const int di = rm.reduced_dims[bi];
    rm.diag_part.block(roff, roff, di, di) = rm.hessian.block(roff, roff, di, di);
    int coff = 0;
    for (int bj = 0; bj < bi; ++bj) {
      const int dj = rm.reduced_dims[bj];
      rm.lower_part.block(roff, coff, di, dj) = -rm.hessian.block(roff, coff, di, dj);
      coff += dj;
    }
    roff += di;
  }
  return rm;
}

RateReport cyclic_rate(const ReducedModel& rm) {
  RateReport report;
  report.kind = RateKind::cyclic;
  report.reduced_dim = rm.dim();
  if (rm.dim() == 0) {
    report.matrix = Matrix::Zero(0, 0);
    return report;
  }
  const Matrix inv_scaling = rm.scaling.ldlt().solve(Matrix::Identity(rm.dim(), rm.dim()));
  const Matrix left = inv_scaling - rm.lower_part;
  const Matrix right = inv_scaling - rm.diag_part + rm.lower_part.transpose();
  report.matrix = left.partialPivLu().solve(right);
  report.spectral_radius = spectral_radius(*report.matrix);
  return report;
}

RateReport jacobi_rate(const ReducedModel& rm) {
  RateReport report;
  report.kind = RateKind::jacobi;
  report.reduced_dim = rm.dim();
  report.matrix =
      Matrix::Identity(rm.dim(), rm.dim()) - rm.scaling * rm.hessian;
  report.spectral_radius = rm.dim() == 0 ? 0.0 : spectral_radius(*report.matrix);
  return report;
}

namespace {

Matrix block_selector(const ReducedModel& rm, int i) {
  Matrix P = Matrix::Zero(rm.dim(), rm.dim());
  const int off = rm.block_offset(i);
  for (int k = 0; k < rm.reduced_dims[i]; ++k) P(off + k, off + k) = 1.0;
  return P;
}

}  // namespace

RateReport coordinate_shrinkage(const ReducedModel& rm, int i) {
  if (i < 0 || i >= rm.n_blocks()) throw std::invalid_argument("block index out of range");
  RateReport report;
  report.kind = RateKind::shrinkage;
  report.block = i;
  report.reduced_dim = rm.dim();
  report.matrix = Matrix::Identity(rm.dim(), rm.dim()) -
                  block_selector(rm, i) * rm.scaling * rm.hessian;
  report.spectral_radius = rm.dim() == 0 ? 0.0 : spectral_radius(*report.matrix);
  return report;
}

ProductIdentityCheck verify_product_identity(const Matrix& D, const Matrix& L, const Matrix& T,
                                             const std::vector<int>& block_dims) {
  const int m = static_cast<int>(D.rows());
  int total = 0;
  for (int d : block_dims) total += d;
  if (total != m || L.rows() != m || T.rows() != m)
    throw std::invalid_argument("verify_product_identity: inconsistent block structure");

  const Matrix H = D - L - L.transpose();
  ProductIdentityCheck check;
  check.lhs = Matrix::Identity(m, m);
  int off = 0;
  for (int i = 0; i < static_cast<int>(block_dims.size()); ++i) {
    Matrix Pi = Matrix::Zero(m, m);
    for (int k = 0; k < block_dims[i]; ++k) Pi(off + k, off + k) = 1.0;
    const Matrix Gi = Matrix::Identity(m, m) - Pi * T * H;
    check.lhs = Gi * check.lhs;  // G_n ... G_1 applied in ascending order
    off += block_dims[i];
  }
  const Matrix Tinv = T.ldlt().solve(Matrix::Identity(m, m));
  check.rhs = (Tinv - L).partialPivLu().solve(Tinv - D + L.transpose());
  check.max_abs_error = (check.lhs - check.rhs).cwiseAbs().maxCoeff();
  return check;
}

namespace {

struct SymmetricSqrt {
  Matrix half;
  Matrix inv_half;
  bool regularized;
};

SymmetricSqrt symmetric_sqrt(const Matrix& H, bool allow_regularization) {
  constexpr double kFloor = 1e-12;
  constexpr double kEps = 1e-10;
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  Vector eigs = es.eigenvalues();
  bool needs_reg = eigs.size() > 0 && eigs.minCoeff() < kFloor;
  if (needs_reg && !allow_regularization)
    throw MissingDataError("reduced Hessian is not positive definite and regularization declined");
  if (needs_reg) eigs.array() += kEps;
  SymmetricSqrt out;
  out.regularized = needs_reg;
  Vector rt = eigs.array().sqrt();
  out.half = es.eigenvectors() * rt.asDiagonal() * es.eigenvectors().transpose();
  out.inv_half =
      es.eigenvectors() * rt.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return out;
}

void check_pi(const Vector& pi, int n) {
  if (pi.size() != n) throw std::invalid_argument("pi length must equal block count");
  if ((pi.array() <= 0).any()) throw std::invalid_argument("pi entries must be positive");
  if (std::abs(pi.sum() - 1.0) > 1e-12) throw std::invalid_argument("pi must sum to 1");
}

}  // namespace

RateReport random_rate_f(const ReducedModel& rm, const Vector& pi, bool allow_regularization) {
  check_pi(pi, rm.n_blocks());
  RateReport report;
  report.kind = RateKind::random_f;
  report.reduced_dim = rm.dim();
  if (rm.dim() == 0) return report;

  const SymmetricSqrt rt = symmetric_sqrt(rm.hessian, allow_regularization);
  report.hypotheses.regularized = rt.regularized;
  report.hypotheses.hessian_pd = !rt.regularized;
  Matrix sum = Matrix::Zero(rm.dim(), rm.dim());
  for (int i = 0; i < rm.n_blocks(); ++i) {
    const Matrix Gi = *coordinate_shrinkage(rm, i).matrix;
    const Matrix Ni = rt.half * Gi * rt.inv_half;
    sum += pi[i] * Ni.transpose() * Ni;
  }
  report.matrix = sum;
  report.spectral_radius = spectral_radius(sum);
  return report;
}

Matrix supernorm_weight(const Vector& pi, const std::vector<Matrix>& gamma_hat_blocks,
                        const BlockStructure& blocks) {
  check_pi(pi, blocks.n());
  if (static_cast<int>(gamma_hat_blocks.size()) != blocks.n())
    throw std::invalid_argument("need one scaling block per coordinate block");
  const int m = blocks.total();
  Matrix W = Matrix::Zero(m, m);
  for (int i = 0; i < blocks.n(); ++i)
    W.block(blocks.offset(i), blocks.offset(i), blocks.dim(i), blocks.dim(i)) =
        blocks.n() * pi[i] * gamma_hat_blocks[i];
  return W.ldlt().solve(Matrix::Identity(m, m));
}

double supernorm(const Vector& x, const Vector& xstar, const ObjectiveModel& f, const Matrix& V,
                 double p_min) {
  const Vector d = x - xstar;
  const double quad = 0.5 * f.blocks.n() * p_min * d.dot(V * d);
  return quad + f.value(x) - f.value(xstar);
}

RateReport random_rate_supernorm(const ReducedModel& rm, const Vector& pi,
                                 const Matrix& V_tilde) {
  check_pi(pi, rm.n_blocks());
  RateReport report;
  report.kind = RateKind::random_supernorm;
  report.reduced_dim = rm.dim();
  if (rm.dim() == 0) return report;
  if (V_tilde.rows() != rm.dim())
    throw std::invalid_argument("V~ dimension must match the reduced space");

  const RateReport f_rate = random_rate_f(rm, pi, /*allow_regularization=*/false);
  const Matrix Vinv = V_tilde.ldlt().solve(Matrix::Identity(rm.dim(), rm.dim()));
  Matrix sum = Matrix::Zero(rm.dim(), rm.dim());
  for (int i = 0; i < rm.n_blocks(); ++i) {
    const Matrix Gi = *coordinate_shrinkage(rm, i).matrix;
    sum += pi[i] * Gi.transpose() * V_tilde * Gi * Vinv;
  }
  const double second = spectral_radius(sum);
  report.spectral_radius = std::max(f_rate.spectral_radius, second);
  report.hypotheses = f_rate.hypotheses;
  return report;
}

Lemma1Envelopes lemma1_envelopes(int n, double p_min, double u_min, int k) {
  if (n < 1 || p_min <= 0 || p_min > 1 || u_min <= 0 || k < 0)
    throw std::invalid_argument("lemma1_envelopes: invalid parameters");
  Lemma1Envelopes env;
  env.sublinear_factor = 1.0 / (1.0 + p_min * k);
  env.linear_factor = 1.0 - 2.0 * p_min * u_min / (u_min + n * p_min);
  return env;
}

double lemma1_u_min(const Matrix& U, const Matrix& V) {
  // Largest u with uV <= U: smallest eigenvalue of V^{-1/2} U V^{-1/2}.
  Eigen::SelfAdjointEigenSolver<Matrix> esv(V);
  if (esv.eigenvalues().minCoeff() <= 0)
    throw std::invalid_argument("lemma1_u_min: V must be positive definite");
  const Matrix v_inv_half = esv.operatorInverseSqrt();
  Eigen::SelfAdjointEigenSolver<Matrix> es(v_inv_half * U * v_inv_half);
  return es.eigenvalues().minCoeff();
}

namespace {

struct BlockSqrtPair {
  Matrix half;      // D^{1/2}
  Matrix inv_half;  // D^{-1/2}
};

BlockSqrtPair block_diag_sqrt(const Matrix& H, const BlockStructure& blocks) {
  const int m = blocks.total();
  BlockSqrtPair out;
  out.half = Matrix::Zero(m, m);
  out.inv_half = Matrix::Zero(m, m);
  for (int i = 0; i < blocks.n(); ++i) {
    const int off = blocks.offset(i);
    const int mi = blocks.dim(i);
    Eigen::SelfAdjointEigenSolver<Matrix> es(H.block(off, off, mi, mi));
    if (es.eigenvalues().minCoeff() <= 0)
      throw std::invalid_argument("series scaling needs positive definite diagonal blocks");
    out.half.block(off, off, mi, mi) = es.operatorSqrt();
    out.inv_half.block(off, off, mi, mi) = es.operatorInverseSqrt();
  }
  return out;
}

Matrix series_core(const Matrix& H, const BlockStructure& blocks, const BlockSqrtPair& rt) {
  // S = D^{-1/2}(L + L')D^{-1/2} with L + L' = D - H.
  Matrix D = Matrix::Zero(H.rows(), H.cols());
  for (int i = 0; i < blocks.n(); ++i) {
    const int off = blocks.offset(i);
    const int mi = blocks.dim(i);
    D.block(off, off, mi, mi) = H.block(off, off, mi, mi);
  }
  return rt.inv_half * (D - H) * rt.inv_half;
}

}  // namespace

ScalingMatrix newton_taylor_scaling(const Matrix& hessian, int q, const BlockStructure& blocks) {
  if (q < 0) throw std::invalid_argument("series order must be nonnegative");
  const BlockSqrtPair rt = block_diag_sqrt(hessian, blocks);
  const Matrix S = series_core(hessian, blocks, rt);
  const double rho = spectral_radius(S);
  if (rho >= 1.0) {
    std::ostringstream msg;
    msg << "inverse-Hessian series invalid: rho(S) = " << rho << " >= 1";
    throw std::invalid_argument(msg.str());
  }
  Matrix partial = Matrix::Identity(hessian.rows(), hessian.cols());
  Matrix power = Matrix::Identity(hessian.rows(), hessian.cols());
  for (int t = 1; t <= q; ++t) {
    power = power * S;
    partial += power;
  }
  ScalingMatrix scale;
  scale.gamma = rt.inv_half * partial * rt.inv_half;
  scale.block_diagonal = false;
  scale.blocks = blocks;
  Eigen::SelfAdjointEigenSolver<Matrix> es(scale.gamma);
  scale.eig_lower = es.eigenvalues().minCoeff();
  scale.eig_upper = es.eigenvalues().maxCoeff();
  if (scale.eig_lower <= 0)
    throw std::invalid_argument("series scaling lost positive definiteness");
  return scale;
}

RateReport newton_taylor_rate(const Matrix& hessian, const ScalingMatrix& gamma,
                              const ReducedBasis& E, int q) {
  const BlockSqrtPair rt = block_diag_sqrt(hessian, gamma.blocks);
  const Matrix S = series_core(hessian, gamma.blocks, rt);
  if (spectral_radius(S) >= 1.0)
    throw std::invalid_argument("inverse-Hessian series invalid: rho(S) >= 1");

  Matrix Spow = Matrix::Identity(hessian.rows(), hessian.cols());
  for (int t = 0; t < q + 1; ++t) Spow = Spow * S;
  const Matrix Z = rt.inv_half * Spow * rt.half;

  RateReport report;
  report.kind = RateKind::newton_taylor;
  report.order = q;
  const Matrix Em = E.assemble();
  const int mt = static_cast<int>(Em.cols());
  report.reduced_dim = mt;
  if (mt == 0) {
    report.matrix = Matrix::Zero(0, 0);
    return report;
  }
  const Matrix lam_tilde = (Em.transpose() * gamma.gamma.ldlt().solve(Em))
                               .ldlt()
                               .solve(Matrix::Identity(mt, mt));
  report.matrix = lam_tilde * Em.transpose() * gamma.gamma.ldlt().solve(Z * Em);
  report.spectral_radius = spectral_radius(*report.matrix);
  return report;
}

EfficiencyFlags efficiency_conditions(const ScalingMatrix& gamma_at_solution,
                                      const Matrix& D_at_solution, double sigma,
                                      const ReducedModel& rm) {
  EfficiencyFlags flags{true, true};
  const int m = gamma_at_solution.dim();
  if (m > 0) {
    const Matrix gamma_inv =
        gamma_at_solution.gamma.ldlt().solve(Matrix::Identity(m, m));
    Eigen::SelfAdjointEigenSolver<Matrix> es(2.0 * (1.0 - sigma) * gamma_inv - D_at_solution);
    flags.efficiency = es.eigenvalues().minCoeff() > 0;
  }
  if (rm.dim() > 0) {
    const Matrix lam_inv = rm.scaling.ldlt().solve(Matrix::Identity(rm.dim(), rm.dim()));
    Eigen::SelfAdjointEigenSolver<Matrix> es(2.0 * lam_inv - rm.diag_part);
    flags.ostrowski = es.eigenvalues().minCoeff() > 0;
  }
  return flags;
}

}  // namespace polycd
