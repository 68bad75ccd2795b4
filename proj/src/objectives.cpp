#include "polycd/objectives.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace polycd {

Matrix ObjectiveModel::hessian_at(const Vector& x) const {
  if (!hessian) throw MissingDataError("objective carries no Hessian callback");
  return hessian(x);
}

Matrix ObjectiveModel::lipschitz_full() const {
  Matrix L = Matrix::Zero(dim(), dim());
  for (int i = 0; i < blocks.n(); ++i)
    L.block(blocks.offset(i), blocks.offset(i), blocks.dim(i), blocks.dim(i)) =
        lipschitz_blocks.at(i);
  return L;
}

ObjectiveModel QuadraticObjective::model(const BlockStructure& blocks) const {
  if (Q.rows() != Q.cols() || Q.rows() != blocks.total() || c.size() != Q.rows())
    throw std::invalid_argument("quadratic data does not match block dimensions");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("Q must be symmetric");

  ObjectiveModel f;
  f.blocks = blocks;
  const Matrix Qc = Q;
  const Vector cc = c;
  f.value = [Qc, cc](const Vector& x) { return 0.5 * x.dot(Qc * x) + cc.dot(x); };
  f.gradient = [Qc, cc](const Vector& x) -> Vector { return Qc * x + cc; };
  f.hessian = [Qc](const Vector&) -> Matrix { return Qc; };
  for (int i = 0; i < blocks.n(); ++i)
    f.lipschitz_blocks.push_back(
        Q.block(blocks.offset(i), blocks.offset(i), blocks.dim(i), blocks.dim(i)));
  Eigen::SelfAdjointEigenSolver<Matrix> es(Q);
  if (es.eigenvalues().minCoeff() > 1e-12) f.strong_convexity = Q;
  return f;
}

Vector QuadraticObjective::unconstrained_minimizer() const {
  return Q.ldlt().solve(-c);
}

ObjectiveModel coordinate_restriction(const ObjectiveModel& f, int i, const Vector& x) {
  if (i < 0 || i >= f.blocks.n()) throw std::invalid_argument("block index out of range");
  const int off = f.blocks.offset(i);
  const int mi = f.blocks.dim(i);
  const Vector base = x;

  auto compose = [base, off, mi](const Vector& mu) {
    Vector full = base;
    full.segment(off, mi) = mu;
    return full;
  };

  ObjectiveModel g;
  g.blocks = BlockStructure::single(mi);
  g.value = [f, compose](const Vector& mu) { return f.value(compose(mu)); };
  g.gradient = [f, compose, off, mi](const Vector& mu) -> Vector {
    return f.gradient(compose(mu)).segment(off, mi);
  };
  if (f.hessian) {
    auto h = f.hessian;
    g.hessian = [h, compose, off, mi](const Vector& mu) -> Matrix {
      return h(compose(mu)).block(off, off, mi, mi);
    };
  }
  g.lipschitz_blocks = {f.lipschitz_blocks.at(i)};
  return g;
}

FiniteDiffReport finite_diff_audit(const ObjectiveModel& f, const Vector& anchor,
                                   int sample_count, double step, std::uint64_t seed) {
  if (step <= 0) throw std::invalid_argument("finite-difference step must be positive");
  const int m = f.dim();
  RngStream rng(seed);
  FiniteDiffReport report;
  report.samples = sample_count;
  if (f.has_hessian()) report.max_hessian_rel_error = 0.0;

  for (int s = 0; s < sample_count; ++s) {
    Vector x = anchor;
    for (int j = 0; j < m; ++j) x[j] += rng.next_uniform(-1.0, 1.0);

    const Vector g = f.gradient(x);
    const double gscale = std::max(1.0, g.norm());
    for (int j = 0; j < m; ++j) {
      Vector e = Vector::Zero(m);
      e[j] = step;
      const double fd = (f.value(x + e) - f.value(x - e)) / (2 * step);
      report.max_gradient_rel_error =
          std::max(report.max_gradient_rel_error, std::abs(fd - g[j]) / gscale);
    }

    if (f.has_hessian()) {
      const Matrix H = f.hessian(x);
      const double hscale = std::max(1.0, H.cwiseAbs().maxCoeff());
      for (int j = 0; j < m; ++j) {
        Vector e = Vector::Zero(m);
        e[j] = step;
        const Vector fd = (f.gradient(x + e) - f.gradient(x - e)) / (2 * step);
        const double err = (fd - H.col(j)).cwiseAbs().maxCoeff() / hscale;
        report.max_hessian_rel_error = std::max(*report.max_hessian_rel_error, err);
      }
    }
  }
  return report;
}

namespace {

Matrix tridiag_second_difference(int m) {
  Matrix T = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    T(i, i) = 2.0;
    if (i + 1 < m) {
      T(i, i + 1) = -1.0;
      T(i + 1, i) = -1.0;
    }
  }
  return T;
}

}  // namespace

ObjectiveModel registry_objective(const std::string& name, const BlockStructure& blocks) {
  const int m = blocks.total();
  if (name == "exp_plus_square") {
    if (m != 2) throw std::invalid_argument("exp_plus_square is 2-dimensional");
    ObjectiveModel f;
    f.blocks = blocks;
    f.value = [](const Vector& x) { return std::exp(x[0]) + x[1] * x[1]; };
    f.gradient = [](const Vector& x) -> Vector {
      Vector g(2);
      g[0] = std::exp(x[0]);
      g[1] = 2 * x[1];
      return g;
    };
    f.hessian = [](const Vector& x) -> Matrix {
      Matrix H = Matrix::Zero(2, 2);
      H(0, 0) = std::exp(x[0]);
      H(1, 1) = 2.0;
      return H;
    };
    // exp(2) < 7.4 bounds block 0 on the reference box.
    for (int i = 0; i < blocks.n(); ++i) {
      Matrix Li = Matrix::Identity(blocks.dim(i), blocks.dim(i)) * 8.0;
      f.lipschitz_blocks.push_back(Li);
    }
    return f;
  }
  if (name == "exp_tridiag") {
    const Matrix T = tridiag_second_difference(m);
    ObjectiveModel f;
    f.blocks = blocks;
    f.value = [T](const Vector& x) { return x.array().exp().sum() + 0.5 * x.dot(T * x); };
    f.gradient = [T](const Vector& x) -> Vector {
      return x.array().exp().matrix() + T * x;
    };
    f.hessian = [T](const Vector& x) -> Matrix {
      Matrix H = T;
      H.diagonal() += x.array().exp().matrix();
      return H;
    };
    for (int i = 0; i < blocks.n(); ++i) {
      const int mi = blocks.dim(i);
      Matrix Li = T.block(blocks.offset(i), blocks.offset(i), mi, mi);
      Li.diagonal().array() += 8.0;  // exp(2) < 7.4 on the reference box
      f.lipschitz_blocks.push_back(Li);
    }
    f.strong_convexity = T;  // exp terms only add curvature
    return f;
  }
  throw std::invalid_argument("unknown registry objective: " + name);
}

}  // namespace polycd
