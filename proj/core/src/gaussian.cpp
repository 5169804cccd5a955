#include "wnewton/gaussian.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace wnewton::gaussian {

namespace {

Eigen::LLT<Eigen::MatrixXd> spd_factor(const Eigen::MatrixXd& mat, const char* what) {
  if (mat.rows() != mat.cols()) throw InvalidInput(std::string(what) + ": matrix not square");
  if ((mat - mat.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, mat.cwiseAbs().maxCoeff()))
    throw InvalidInput(std::string(what) + ": matrix not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(mat);
  if (llt.info() != Eigen::Success)
    throw InvalidInput(std::string(what) + ": matrix not positive definite");
  return llt;
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

double kl_gaussian(const Eigen::MatrixXd& cov, const Eigen::MatrixXd& cov_target) {
  const auto llt = spd_factor(cov, "kl_gaussian cov");
  const auto llt_target = spd_factor(cov_target, "kl_gaussian cov_target");
  const int d = static_cast<int>(cov.rows());
  if (cov_target.rows() != d) throw InvalidInput("kl_gaussian: dimension mismatch");
  const double trace_term = llt_target.solve(cov).trace();
  const double log_det = log_det_from_llt(llt) - log_det_from_llt(llt_target);
  return 0.5 * (trace_term - d - log_det);
}

Eigen::MatrixXd solve_newton_direction(const Eigen::MatrixXd& cov,
                                       const Eigen::MatrixXd& cov_target) {
  const int d = static_cast<int>(cov.rows());
  if (d > kMaxNewtonDim)
    throw CapacityError("solve_newton_direction: dimension exceeds vectorized-solve cap");
  spd_factor(cov, "solve_newton_direction cov");
  const auto llt_target = spd_factor(cov_target, "solve_newton_direction cov_target");
  const Eigen::MatrixXd precision = llt_target.solve(Eigen::MatrixXd::Identity(d, d));

  // vec(C S W) = kron(W, C) vec(S) for symmetric W; stack both products.
  const int dd = d * d;
  Eigen::MatrixXd system(dd, dd);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      system.block(i * d, j * d, d, d) =
          2.0 * precision(j, i) * cov + 2.0 * cov(j, i) * precision;
  system += 4.0 * Eigen::MatrixXd::Identity(dd, dd);

  const Eigen::MatrixXd rhs_mat =
      -(cov * precision + precision * cov - 2.0 * Eigen::MatrixXd::Identity(d, d));
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(rhs_mat.data(), dd);

  Eigen::VectorXd sol = Eigen::LDLT<Eigen::MatrixXd>(system).solve(rhs);
  Eigen::MatrixXd direction = Eigen::Map<const Eigen::MatrixXd>(sol.data(), d, d);
  direction = 0.5 * (direction + direction.transpose()).eval();

  const Eigen::MatrixXd lhs = 2.0 * cov * direction * precision +
                              2.0 * precision * direction * cov + 4.0 * direction;
  const double residual = (lhs - rhs_mat).norm();
  if (residual > 1e-10 * (1.0 + rhs_mat.norm()))
    throw Error("solve_newton_direction: residual above tolerance");
  return direction;
}

GaussianState step_newton_geodesic(const GaussianState& state, const Eigen::MatrixXd& direction,
                                   const Eigen::VectorXd& mean_target, double dt) {
  const int d = static_cast<int>(state.cov.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(direction);
  const Eigen::VectorXd evals = es.eigenvalues();
  const double worst = (Eigen::VectorXd::Ones(d) + 2.0 * dt * evals).cwiseAbs().minCoeff();
  if (worst <= 1e-12 * std::max(1.0, (2.0 * dt * evals).cwiseAbs().maxCoeff()))
    throw StepTooLarge("step_newton_geodesic: I + 2 dt S is singular, reduce dt");

  const Eigen::MatrixXd congruence = Eigen::MatrixXd::Identity(d, d) + 2.0 * dt * direction;
  GaussianState next;
  next.cov = congruence * state.cov * congruence;
  next.cov = 0.5 * (next.cov + next.cov.transpose()).eval();
  // Exact solution of d mu = (mu_target - mu) dt over the step.
  next.mean = mean_target + std::exp(-dt) * (state.mean - mean_target);
  return next;
}

MeanVar closed_form_1d(Dynamics1d method, double mean0, double var0, double mean_target,
                       double var_target, double t) {
  if (!(var0 > 0.0) || !(var_target > 0.0))
    throw InvalidInput("closed_form_1d: variances must be positive");
  MeanVar out;
  switch (method) {
    case Dynamics1d::Nld: {
      out.mean = mean_target + std::exp(-t) * (mean0 - mean_target);
      const double gap = var0 - var_target;
      if (gap == 0.0) {
        out.var = var_target;
        break;
      }
      const double q = (gap * gap / var0) * std::exp(-2.0 * t);
      // var^2 - (2 var* + q) var + var*^2 = 0; roots straddle var*.
      const double b = 2.0 * var_target + q;
      const double disc = std::sqrt(q * q + 4.0 * var_target * q);
      const double larger = 0.5 * (b + disc);
      out.var = (gap > 0.0) ? larger : (var_target * var_target) / larger;
      break;
    }
    case Dynamics1d::OldLld: {
      const double rate = 1.0 / var_target;
      out.mean = mean_target + std::exp(-rate * t) * (mean0 - mean_target);
      out.var = var_target + std::exp(-2.0 * rate * t) * (var0 - var_target);
      break;
    }
    case Dynamics1d::Hamcmc: {
      out.mean = mean_target + std::exp(-t) * (mean0 - mean_target);
      out.var = var_target + std::exp(-2.0 * t) * (var0 - var_target);
      break;
    }
  }
  return out;
}

AffineField1d newton_direction_affine_1d(double mean, double var, double mean_target,
                                         double var_target) {
  if (!(var > 0.0) || !(var_target > 0.0))
    throw InvalidInput("newton_direction_affine_1d: variances must be positive");
  const double prec = 1.0 / var;
  const double prec_target = 1.0 / var_target;
  AffineField1d field;
  field.slope = (prec - prec_target) / (prec + prec_target);
  field.intercept = -2.0 * prec / (prec + prec_target) * mean + mean_target;
  return field;
}

}  // namespace wnewton::gaussian
