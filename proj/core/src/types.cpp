#include "wnewton/types.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "wnewton/rng.hpp"

namespace wnewton {

ModelDiagnostics validate_model(const TargetModel& model,
                                const std::vector<Eigen::VectorXd>& probes,
                                double gradient_step, double hessian_step) {
  if (probes.empty()) throw InvalidInput("validate_model: probe list is empty");
  const int d = model.dim;
  ModelDiagnostics diag;

  for (const auto& x : probes) {
    if (x.size() != d) throw InvalidInput("validate_model: probe dimension mismatch");
    const double fx = model.potential(x);
    if (!std::isfinite(fx)) throw InvalidModel("validate_model: non-finite potential at probe");

    const Eigen::VectorXd grad = model.gradient(x);
    const Eigen::MatrixXd hess = model.hessian(x);
    diag.max_hessian_asymmetry =
        std::max(diag.max_hessian_asymmetry, (hess - hess.transpose()).cwiseAbs().maxCoeff());

    Eigen::VectorXd grad_fd(d);
    const double hg = gradient_step;
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += hg;
      xm[i] -= hg;
      grad_fd[i] = (model.potential(xp) - model.potential(xm)) / (2.0 * hg);
    }
    const double grad_err = (grad - grad_fd).norm() / std::max(1.0, grad_fd.norm());
    diag.max_gradient_error = std::max(diag.max_gradient_error, grad_err);

    Eigen::MatrixXd hess_fd(d, d);
    const double hh = hessian_step;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
        xpp[i] += hh;
        xpp[j] += hh;
        xpm[i] += hh;
        xpm[j] -= hh;
        xmp[i] -= hh;
        xmp[j] += hh;
        xmm[i] -= hh;
        xmm[j] -= hh;
        hess_fd(i, j) = (model.potential(xpp) - model.potential(xpm) - model.potential(xmp) +
                         model.potential(xmm)) /
                        (4.0 * hh * hh);
      }
    }
    const double hess_err = (hess - hess_fd).norm() / std::max(1.0, hess_fd.norm());
    diag.max_hessian_error = std::max(diag.max_hessian_error, hess_err);
  }
  return diag;
}

ParticleEnsemble init_ensemble(int count, const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov, std::uint64_t seed) {
  if (count < 1) throw InvalidConfig("init_ensemble: particle count must be >= 1");
  const int d = static_cast<int>(mean.size());
  if (cov.rows() != d || cov.cols() != d)
    throw InvalidConfig("init_ensemble: covariance shape mismatch");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw InvalidConfig("init_ensemble: covariance is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd evals = es.eigenvalues();
  const double scale = std::max(1.0, evals.cwiseAbs().maxCoeff());
  if (evals.minCoeff() < -1e-12 * scale)
    throw InvalidConfig("init_ensemble: covariance has a negative eigenvalue");
  // Symmetric square root; zero eigenvalues collapse those directions.
  const Eigen::MatrixXd root =
      es.eigenvectors() * evals.cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();

  ParticleEnsemble ensemble;
  ensemble.positions.resize(count, d);
  ensemble.iteration = 0;
  ensemble.seed = seed;
  for (int i = 0; i < count; ++i) {
    Rng rng(seed, RngStream::Init, 0, static_cast<std::uint64_t>(i));
    ensemble.positions.row(i) = (mean + root * rng.normal_vector(d)).transpose();
  }
  return ensemble;
}

void check_finite(const ParticleEnsemble& ensemble) {
  if (ensemble.count() < 1) throw InvalidInput("ensemble: no particles");
  if (!ensemble.positions.allFinite()) throw InvalidInput("ensemble: non-finite coordinate");
}

}  // namespace wnewton
