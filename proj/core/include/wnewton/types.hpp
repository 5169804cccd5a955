#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "wnewton/errors.hpp"

namespace wnewton {

/// Target density rho*(x) proportional to exp(-potential(x)), with analytic
/// derivatives. `exact_score` is grad log rho* and is only consumed by tests
/// and oracle runs.
struct TargetModel {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&)> potential;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> exact_score;
};

/// N particle positions, one row per particle.
struct ParticleEnsemble {
  Eigen::MatrixXd positions;
  std::int64_t iteration = 0;
  std::uint64_t seed = 0;

  int count() const { return static_cast<int>(positions.rows()); }
  int dim() const { return static_cast<int>(positions.cols()); }
};

/// Closed-form coefficients of a diagonal-quadratic potential direction:
/// grad Phi(x) = diag(scale) x + offset.
struct AffineCoefficients {
  Eigen::VectorXd scale;
  Eigen::VectorXd offset;
};

/// Kernel-representation coefficients; `beta` is empty in reduced mode.
struct KernelCoefficients {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::MatrixXd anchors;
  double bandwidth = 0.0;
};

/// Per-particle Newton direction vectors, optionally with a coefficient
/// payload usable for off-particle evaluation.
struct DirectionField {
  Eigen::MatrixXd vectors;
  std::optional<AffineCoefficients> affine;
  std::optional<KernelCoefficients> kernel;
};

struct ModelDiagnostics {
  double max_gradient_error = 0.0;  // relative, against central differences
  double max_hessian_error = 0.0;
  double max_hessian_asymmetry = 0.0;
};

/// Checks analytic gradient/hessian against finite differences of the
/// potential at the given probes. Throws InvalidModel if the potential is
/// non-finite at a probe.
ModelDiagnostics validate_model(const TargetModel& model,
                                const std::vector<Eigen::VectorXd>& probes,
                                double gradient_step = 1e-5,
                                double hessian_step = 1e-4);

/// Draws `count` particles from N(mean, cov). `cov` must be symmetric
/// positive semidefinite (a zero matrix yields a point mass at the mean).
ParticleEnsemble init_ensemble(int count, const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov, std::uint64_t seed);

void check_finite(const ParticleEnsemble& ensemble);

}  // namespace wnewton
