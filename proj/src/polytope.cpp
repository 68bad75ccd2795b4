#include "polycd/polytope.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nnls_detail.hpp"

namespace polycd {

Polyhedron::Polyhedron(Matrix A, Vector b, BlockStructure blocks)
    : A_(std::move(A)), b_(std::move(b)), blocks_(std::move(blocks)) {
  if (A_.rows() != b_.size()) throw std::invalid_argument("A and b row counts differ");
  if (A_.cols() != blocks_.total())
    throw std::invalid_argument("constraint columns do not match block dimensions");
  if (!A_.allFinite() || !b_.allFinite())
    throw std::invalid_argument("constraint entries must be finite");

  block_rows_.resize(blocks_.n());
  row_block_.resize(A_.rows());
  for (int j = 0; j < A_.rows(); ++j) {
    int owner = -1;
    for (int i = 0; i < blocks_.n(); ++i) {
      const bool nonzero =
          A_.row(j).segment(blocks_.offset(i), blocks_.dim(i)).cwiseAbs().maxCoeff() > 0.0;
      if (!nonzero) continue;
      if (owner >= 0)
        throw std::invalid_argument("row " + std::to_string(j) +
                                    " straddles blocks; rows must be block-confined");
      owner = i;
    }
    if (owner < 0)
      throw std::invalid_argument("row " + std::to_string(j) + " is identically zero");
    row_block_[j] = owner;
    block_rows_[owner].push_back(j);
  }
}

Polyhedron Polyhedron::unconstrained(BlockStructure blocks) {
  const int m = blocks.total();
  return Polyhedron(Matrix::Zero(0, m), Vector::Zero(0), std::move(blocks));
}

Polyhedron Polyhedron::block_restriction(int i) const {
  const auto& rows = block_rows_.at(i);
  const int mi = blocks_.dim(i);
  Matrix Ai(static_cast<int>(rows.size()), mi);
  Vector bi(static_cast<int>(rows.size()));
  for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
    Ai.row(r) = A_.row(rows[r]).segment(blocks_.offset(i), mi);
    bi[r] = b_[rows[r]];
  }
  return Polyhedron(std::move(Ai), std::move(bi), BlockStructure::single(mi));
}

int ReducedBasis::reduced_total() const {
  int t = 0;
  for (int d : reduced_dims) t += d;
  return t;
}

Matrix ReducedBasis::assemble() const {
  const int m = blocks.total();
  Matrix E = Matrix::Zero(m, reduced_total());
  int col = 0;
  for (int i = 0; i < blocks.n(); ++i) {
    if (reduced_dims[i] > 0)
      E.block(blocks.offset(i), col, blocks.dim(i), reduced_dims[i]) = block_bases[i];
    col += reduced_dims[i];
  }
  return E;
}

bool contains(const Polyhedron& P, const Vector& x, double tol) {
  if (x.size() != P.ambient_dim()) throw std::invalid_argument("point dimension mismatch");
  if (tol < 0) throw std::invalid_argument("tolerance must be nonnegative");
  if (P.num_rows() == 0) return true;
  return ((P.A() * x - P.b()).array() <= tol).all();
}

ActiveSet active_set(const Polyhedron& P, const Vector& x, double tol) {
  if (x.size() != P.ambient_dim()) throw std::invalid_argument("point dimension mismatch");
  ActiveSet s;
  if (P.num_rows() == 0) return s;
  const Vector slack = P.A() * x - P.b();
  if ((slack.array() > tol).any()) {
    std::ostringstream msg;
    msg << "point infeasible: max violation " << slack.maxCoeff() << " exceeds tol " << tol;
    throw InfeasibleError(msg.str());
  }
  for (int j = 0; j < slack.size(); ++j)
    if (std::abs(slack[j]) <= tol) s.indices.push_back(j);
  return s;
}

namespace {

// Null space of the active rows within one block: right singular vectors below
// the rank threshold, columns sign-fixed so the first nonvanishing entry is
// positive. Deterministic for reproducible rate matrices.
Matrix block_null_space(const Matrix& rows, int mi) {
  if (rows.rows() == 0) return Matrix::Identity(mi, mi);
  Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double thresh = 1e-10 * (sv.size() > 0 ? sv[0] : 0.0);
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k)
    if (sv[k] > thresh) ++rank;
  Matrix E = svd.matrixV().rightCols(mi - rank);
  for (int c = 0; c < E.cols(); ++c) {
    for (int r = 0; r < E.rows(); ++r) {
      if (std::abs(E(r, c)) > 1e-12) {
        if (E(r, c) < 0) E.col(c) = -E.col(c);
        break;
      }
    }
  }
  return E;
}

}  // namespace

ReducedBasis reduced_basis(const Polyhedron& P, const ActiveSet& S) {
  ReducedBasis basis;
  basis.blocks = P.blocks();
  basis.block_bases.resize(P.blocks().n());
  basis.reduced_dims.resize(P.blocks().n());
  for (int i = 0; i < P.blocks().n(); ++i) {
    const int mi = P.blocks().dim(i);
    std::vector<int> active_here;
    for (int j : S.indices)
      if (P.row_block(j) == i) active_here.push_back(j);
    Matrix rows(static_cast<int>(active_here.size()), mi);
    for (int r = 0; r < static_cast<int>(active_here.size()); ++r)
      rows.row(r) = P.A().row(active_here[r]).segment(P.blocks().offset(i), mi);
    basis.block_bases[i] = block_null_space(rows, mi);
    basis.reduced_dims[i] = static_cast<int>(basis.block_bases[i].cols());
  }
  return basis;
}

KktResult kkt_multipliers(const Polyhedron& P, const ActiveSet& S, const Vector& g) {
  if (g.size() != P.ambient_dim()) throw std::invalid_argument("gradient dimension mismatch");
  const int k = S.size();
  KktResult res;
  if (k == 0) {
    res.multipliers = Vector::Zero(0);
    res.residual = g.norm();
    return res;
  }
  // minimize || g + As' z ||^2 over z >= 0  <=>  0.5 z'Mz - q'z with
  // M = As As', q = -As g.
  Matrix As(k, P.ambient_dim());
  for (int r = 0; r < k; ++r) As.row(r) = P.A().row(S.indices[r]);
  const Matrix M = As * As.transpose();
  const Vector q = -As * g;
  auto nnls = detail::nnls_quadratic(M, q, 100 * k);
  if (!nnls.converged)
    throw IterationCapError("NNLS multiplier fit hit its iteration cap (100*|S|)");
  res.multipliers = nnls.z;
  res.residual = (g + As.transpose() * nnls.z).norm();
  return res;
}

StrictComplementarity strict_complementarity(const Polyhedron& P, const ActiveSet& S,
                                             const Vector& g, double tol) {
  StrictComplementarity out;
  if (S.empty()) {
    out.holds = g.norm() <= tol;
    out.min_multiplier = std::numeric_limits<double>::infinity();
    return out;
  }
  const KktResult kkt = kkt_multipliers(P, S, g);
  out.min_multiplier = kkt.multipliers.minCoeff();
  out.holds = kkt.residual <= tol && out.min_multiplier > tol;
  return out;
}

}  // namespace polycd
