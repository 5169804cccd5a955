#include "wnewton/newton_affine.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace wnewton::affine {

QuadraticSystem assemble_quadratic_system(const ParticleEnsemble& ensemble,
                                          const TargetModel& model,
                                          const score::ScoreEstimate& score, double eps) {
  check_finite(ensemble);
  const int n = ensemble.count();
  const int d = ensemble.dim();
  if (score.values.rows() != n || score.values.cols() != d)
    throw InvalidInput("assemble_quadratic_system: score rows not aligned with ensemble");
  if (eps < 0.0) throw InvalidInput("assemble_quadratic_system: eps must be nonnegative");

  Eigen::MatrixXd quad = Eigen::MatrixXd::Zero(d, d);   // avg diag(x) A diag(x)
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(d, d);  // avg diag(x) A
  Eigen::MatrixXd plain = Eigen::MatrixXd::Zero(d, d);  // avg A
  Eigen::VectorXd rhs_quad = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd rhs_plain = Eigen::VectorXd::Zero(d);

  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = ensemble.positions.row(i).transpose();
    Eigen::MatrixXd a = model.hessian(x);
    a = 0.5 * (a + a.transpose()).eval();
    a.diagonal().array() += eps;
    const Eigen::VectorXd v = model.gradient(x) + score.values.row(i).transpose();

    // upper triangles only, mirrored below, so symmetry is exact
    for (int r = 0; r < d; ++r)
      for (int c = r; c < d; ++c) quad(r, c) += x[r] * a(r, c) * x[c];
    plain.triangularView<Eigen::Upper>() += a.triangularView<Eigen::Upper>();
    cross += x.asDiagonal() * a;
    rhs_quad += x.cwiseProduct(v);
    rhs_plain += v;
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  QuadraticSystem sys;
  sys.mat.resize(2 * d, 2 * d);
  sys.rhs.resize(2 * d);

  Eigen::MatrixXd quad_sym = quad;
  Eigen::MatrixXd plain_sym = plain;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < r; ++c) {
      quad_sym(r, c) = quad(c, r);
      plain_sym(r, c) = plain(c, r);
    }

  sys.mat.topLeftCorner(d, d) = Eigen::MatrixXd::Identity(d, d) + inv_n * quad_sym;
  sys.mat.topRightCorner(d, d) = inv_n * cross;
  sys.mat.bottomLeftCorner(d, d) = sys.mat.topRightCorner(d, d).transpose();
  sys.mat.bottomRightCorner(d, d) = inv_n * plain_sym;
  sys.rhs.head(d) = inv_n * rhs_quad;
  sys.rhs.tail(d) = inv_n * rhs_plain;
  return sys;
}

namespace {

Eigen::VectorXd symmetric_solve(const Eigen::MatrixXd& mat, const Eigen::VectorXd& rhs,
                                double ridge, double cutoff_rel, SolveInfo* info) {
  if (mat.rows() != mat.cols() || mat.rows() != rhs.size())
    throw InvalidInput("symmetric_solve: shape mismatch");
  Eigen::MatrixXd work = mat;
  work.diagonal().array() += ridge;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(work);
  const Eigen::VectorXd evals = es.eigenvalues();
  const double top = evals.cwiseAbs().maxCoeff();
  const double cutoff = cutoff_rel * top;

  Eigen::VectorXd inv = Eigen::VectorXd::Zero(evals.size());
  bool dropped = false;
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (std::abs(evals[i]) > cutoff && evals[i] != 0.0)
      inv[i] = 1.0 / evals[i];
    else
      dropped = true;
  }
  const Eigen::VectorXd sol =
      es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * (-rhs);
  if (info) {
    info->used_pseudo_inverse = dropped;
    info->residual = (work * sol + rhs).norm();
  }
  return sol;
}

}  // namespace

AffineDirection solve_affine_direction(const Eigen::MatrixXd& mat, const Eigen::VectorXd& rhs,
                                       double ridge, SolveInfo* info) {
  if ((mat - mat.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, mat.cwiseAbs().maxCoeff()))
    throw InvalidInput("solve_affine_direction: matrix not symmetric");
  const int d = static_cast<int>(mat.rows()) / 2;
  const Eigen::VectorXd sol = symmetric_solve(mat, rhs, ridge, 1e-12, info);
  AffineDirection dir;
  dir.scale = sol.head(d);
  dir.offset = sol.tail(d);
  return dir;
}

double default_ridge(const Eigen::MatrixXd& mat) {
  return 1e-10 * mat.trace() / static_cast<double>(mat.rows());
}

GeneralSystem assemble_general_basis(const ParticleEnsemble& ensemble, const TargetModel& model,
                                     const score::ScoreEstimate& score, double eps,
                                     const GeneralBasis& basis) {
  check_finite(ensemble);
  const int n = ensemble.count();
  const int d = ensemble.dim();
  const int m = basis.size();
  if (m < 1) throw InvalidInput("assemble_general_basis: empty basis");
  if (score.values.rows() != n)
    throw InvalidInput("assemble_general_basis: score rows not aligned with ensemble");

  Eigen::MatrixXd curv = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd frob = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);

  Eigen::MatrixXd jac(m, d);
  std::vector<Eigen::MatrixXd> hess(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = ensemble.positions.row(i).transpose();
    Eigen::MatrixXd a = model.hessian(x);
    a = 0.5 * (a + a.transpose()).eval();
    a.diagonal().array() += eps;
    const Eigen::VectorXd v = model.gradient(x) + score.values.row(i).transpose();

    for (int b = 0; b < m; ++b) {
      jac.row(b) = basis.functions[static_cast<std::size_t>(b)].gradient(x).transpose();
      hess[static_cast<std::size_t>(b)] = basis.functions[static_cast<std::size_t>(b)].hessian(x);
    }
    const Eigen::MatrixXd ja = jac * a;
    for (int r = 0; r < m; ++r)
      for (int c = r; c < m; ++c) {
        curv(r, c) += ja.row(r).dot(jac.row(c));
        frob(r, c) += hess[static_cast<std::size_t>(r)]
                          .cwiseProduct(hess[static_cast<std::size_t>(c)])
                          .sum();
      }
    rhs += jac * v;
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  GeneralSystem sys;
  sys.mat.resize(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = r; c < m; ++c) {
      sys.mat(r, c) = inv_n * (curv(r, c) + frob(r, c));
      sys.mat(c, r) = sys.mat(r, c);
    }
  sys.rhs = inv_n * rhs;
  return sys;
}

Eigen::VectorXd solve_general_coefficients(const GeneralSystem& system, double ridge,
                                           SolveInfo* info) {
  return symmetric_solve(system.mat, system.rhs, ridge, 1e-12, info);
}

Eigen::MatrixXd evaluate_affine(const AffineDirection& direction, const Eigen::MatrixXd& at) {
  return (at * direction.scale.asDiagonal()).rowwise() + direction.offset.transpose();
}

GeneralBasis diagonal_quadratic_basis(int dim) {
  GeneralBasis basis;
  basis.functions.reserve(static_cast<std::size_t>(2 * dim));
  for (int i = 0; i < dim; ++i) {
    BasisFunction linear;
    linear.value = [i](const Eigen::VectorXd& x) { return x[i]; };
    linear.gradient = [i, dim](const Eigen::VectorXd&) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
      g[i] = 1.0;
      return g;
    };
    linear.hessian = [dim](const Eigen::VectorXd&) {
      return Eigen::MatrixXd::Zero(dim, dim).eval();
    };
    basis.functions.push_back(std::move(linear));
  }
  for (int i = 0; i < dim; ++i) {
    BasisFunction square;
    square.value = [i](const Eigen::VectorXd& x) { return x[i] * x[i]; };
    square.gradient = [i, dim](const Eigen::VectorXd& x) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
      g[i] = 2.0 * x[i];
      return g;
    };
    square.hessian = [i, dim](const Eigen::VectorXd&) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
      h(i, i) = 2.0;
      return h;
    };
    basis.functions.push_back(std::move(square));
  }
  return basis;
}

}  // namespace wnewton::affine
