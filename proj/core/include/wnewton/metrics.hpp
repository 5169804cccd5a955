#pragma once

#include <Eigen/Core>

#include "wnewton/blr.hpp"
#include "wnewton/types.hpp"

namespace wnewton::harness {

/// Energy distance 2 E|x-y| - E|x-x'| - E|y-y'| between two samples,
/// V-statistic form. `self_b` caches the reference self-term across calls
/// (pass a negative value to force recomputation).
double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       double* self_b = nullptr);

struct MomentErrors {
  double mean_error = 0.0;  // Euclidean distance of means
  double cov_error = 0.0;   // Frobenius distance of covariances
};

MomentErrors moment_errors(const Eigen::MatrixXd& sample, const Eigen::VectorXd& mean_ref,
                           const Eigen::MatrixXd& cov_ref);

/// KL divergence of the moment-matched Gaussian fit of `sample` from
/// N(mean_ref, cov_ref); the descent surrogate used on Gaussian targets.
double gaussian_fit_kl(const Eigen::MatrixXd& sample, const Eigen::VectorXd& mean_ref,
                       const Eigen::MatrixXd& cov_ref);

struct BlrMetrics {
  double accuracy = 0.0;
  double log_likelihood = 0.0;  // mean predictive test log-likelihood
};

/// Predictive metrics averaged over the posterior sample of weight vectors.
BlrMetrics blr_test_metrics(const Eigen::MatrixXd& weight_sample, const BlrDataset& data);

}  // namespace wnewton::harness
