#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "polycd/block_structure.hpp"
#include "polycd/errors.hpp"

namespace polycd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Default absolute tolerance on a_j'x - b_j for activity tests; matches the
/// double-precision accuracy of the projection QP.
inline constexpr double kActiveTol = 1e-8;

/// Feasible set { x : A x <= b }. Rows are immutable after construction.
/// When the block structure has n > 1 blocks, every row must have its nonzero
/// entries confined to exactly one block (Cartesian-product requirement).
class Polyhedron {
 public:
  Polyhedron(Matrix A, Vector b, BlockStructure blocks);

  /// Unconstrained ambient space (p = 0).
  static Polyhedron unconstrained(BlockStructure blocks);

  int ambient_dim() const { return static_cast<int>(A_.cols()); }
  int num_rows() const { return static_cast<int>(A_.rows()); }
  const Matrix& A() const { return A_; }
  const Vector& b() const { return b_; }
  const BlockStructure& blocks() const { return blocks_; }

  /// Block owning row j's support; -1 when p = 0 never occurs (rows are nonzero).
  int row_block(int j) const { return row_block_.at(j); }

  /// Rows supported on block i.
  const std::vector<int>& block_rows(int i) const { return block_rows_.at(i); }

  /// Restriction of the constraint system to one block's coordinates.
  Polyhedron block_restriction(int i) const;

 private:
  Matrix A_;
  Vector b_;
  BlockStructure blocks_;
  std::vector<int> row_block_;
  std::vector<std::vector<int>> block_rows_;
};

/// Strictly increasing 0-based constraint indices.
struct ActiveSet {
  std::vector<int> indices;

  bool operator==(const ActiveSet& o) const { return indices == o.indices; }
  bool empty() const { return indices.empty(); }
  int size() const { return static_cast<int>(indices.size()); }
};

/// Per-block orthonormal bases E_i of the null space of the active rows.
/// The assembled basis E = blockdiag(E_1, ..., E_n) spans the reduced space.
struct ReducedBasis {
  std::vector<Matrix> block_bases;  // E_i, shape m_i x mtilde_i (mtilde_i may be 0)
  BlockStructure blocks;            // ambient block structure
  std::vector<int> reduced_dims;    // mtilde_i

  int reduced_total() const;
  Matrix assemble() const;  // m x mtilde block-diagonal matrix
};

bool contains(const Polyhedron& P, const Vector& x, double tol);

/// Indices j with |a_j'x - b_j| <= tol. Throws InfeasibleError when x violates
/// some row by more than tol.
ActiveSet active_set(const Polyhedron& P, const Vector& x, double tol = kActiveTol);

/// Orthonormal per-block null-space bases of the active rows. Deterministic:
/// rank-revealing SVD per block (threshold 1e-10 * sigma_max) and a sign
/// convention making the first nonzero entry of every column positive.
ReducedBasis reduced_basis(const Polyhedron& P, const ActiveSet& S);

struct KktResult {
  Vector multipliers;  // over S, same order as S.indices
  double residual;     // || g + sum_j zeta_j a_j ||
};

/// Nonnegative least-squares fit of g = -sum_{j in S} zeta_j a_j.
/// Classical active-set NNLS iteration, cap 100*|S|.
KktResult kkt_multipliers(const Polyhedron& P, const ActiveSet& S, const Vector& g);

struct StrictComplementarity {
  bool holds;
  double min_multiplier;  // +infinity when S is empty and ||g|| <= tol
};

StrictComplementarity strict_complementarity(const Polyhedron& P, const ActiveSet& S,
                                             const Vector& g, double tol = kActiveTol);

}  // namespace polycd
