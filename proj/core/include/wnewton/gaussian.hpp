#pragma once

#include <Eigen/Core>

#include "wnewton/errors.hpp"

namespace wnewton::gaussian {

/// Gaussian-family flow state: mean and SPD covariance.
struct GaussianState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// KL divergence between N(*, cov) and N(*, cov_target) restricted to the
/// covariance part: 0.5 (tr(C W) - d - log det(C W)), W = cov_target^-1.
double kl_gaussian(const Eigen::MatrixXd& cov, const Eigen::MatrixXd& cov_target);

/// Solves 2 C S W + 2 W S C + 4 S = -(C W + W C - 2 I) for the symmetric
/// Newton direction matrix S, with W = cov_target^-1, via Kronecker
/// vectorization. Dimension capped at 64.
Eigen::MatrixXd solve_newton_direction(const Eigen::MatrixXd& cov,
                                       const Eigen::MatrixXd& cov_target);

inline constexpr int kMaxNewtonDim = 64;

/// Geodesic covariance update cov' = (I + 2 dt S) cov (I + 2 dt S), SPD by
/// congruence, composed with the exact mean flow d mu = (mu_target - mu) dt.
GaussianState step_newton_geodesic(const GaussianState& state, const Eigen::MatrixXd& direction,
                                   const Eigen::VectorXd& mean_target, double dt);

enum class Dynamics1d { Nld, OldLld, Hamcmc };

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
};

/// Closed-form mean/variance trajectories of the 1D Gaussian-family flows.
///
/// Nld follows mu_t = mu* + e^-t (mu0 - mu*) and the variance solves
///   (var_t - var*)^2 = ((var0 - var*)^2 / var0) e^{-2t} var_t,
/// taking the quadratic root on the same side of var* as var0.
/// OldLld decays at rate 1/var*, Hamcmc at rate 1 for the mean and 2 for the
/// variance gap.
MeanVar closed_form_1d(Dynamics1d method, double mean0, double var0, double mean_target,
                       double var_target, double t);

struct AffineField1d {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Exact 1D Newton direction for Gaussian current/target:
/// u(x) = ((1/v - 1/v*)/(1/v + 1/v*)) x - (2/v)/(1/v + 1/v*) mu + mu*.
AffineField1d newton_direction_affine_1d(double mean, double var, double mean_target,
                                         double var_target);

}  // namespace wnewton::gaussian
