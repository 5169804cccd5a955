#include "wnewton/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace wnewton::harness {

namespace {

double mean_pairwise(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      total += (a.row(i) - b.row(j)).norm();
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double* self_b) {
  if (a.cols() != b.cols()) throw InvalidInput("energy_distance: dimension mismatch");
  const double cross = mean_pairwise(a, b);
  const double self_a = mean_pairwise(a, a);
  double self_ref;
  if (self_b && *self_b >= 0.0)
    self_ref = *self_b;
  else {
    self_ref = mean_pairwise(b, b);
    if (self_b) *self_b = self_ref;
  }
  return 2.0 * cross - self_a - self_ref;
}

MomentErrors moment_errors(const Eigen::MatrixXd& sample, const Eigen::VectorXd& mean_ref,
                           const Eigen::MatrixXd& cov_ref) {
  const double n = static_cast<double>(sample.rows());
  const Eigen::RowVectorXd mean = sample.colwise().mean();
  const Eigen::MatrixXd centered = sample.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / n;
  MomentErrors err;
  err.mean_error = (mean.transpose() - mean_ref).norm();
  err.cov_error = (cov - cov_ref).norm();
  return err;
}

double gaussian_fit_kl(const Eigen::MatrixXd& sample, const Eigen::VectorXd& mean_ref,
                       const Eigen::MatrixXd& cov_ref) {
  const double n = static_cast<double>(sample.rows());
  const int d = static_cast<int>(sample.cols());
  const Eigen::RowVectorXd mean = sample.colwise().mean();
  const Eigen::MatrixXd centered = sample.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / n;
  cov.diagonal().array() += 1e-12;

  const Eigen::LLT<Eigen::MatrixXd> llt_ref(cov_ref);
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt_ref.info() != Eigen::Success || llt.info() != Eigen::Success)
    throw InvalidInput("gaussian_fit_kl: covariance not positive definite");
  const auto log_det = [](const Eigen::LLT<Eigen::MatrixXd>& f) {
    return 2.0 * f.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };
  const Eigen::VectorXd gap = mean.transpose() - mean_ref;
  return 0.5 * (llt_ref.solve(cov).trace() + gap.dot(llt_ref.solve(gap)) - d +
                log_det(llt_ref) - log_det(llt));
}

BlrMetrics blr_test_metrics(const Eigen::MatrixXd& weight_sample, const BlrDataset& data) {
  const Eigen::Index tests = data.test_features.rows();
  const Eigen::Index draws = weight_sample.rows();
  if (tests == 0 || draws == 0) throw InvalidInput("blr_test_metrics: empty input");

  BlrMetrics out;
  int hits = 0;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < tests; ++i) {
    double prob = 0.0;
    for (Eigen::Index s = 0; s < draws; ++s)
      prob += sigmoid(data.test_features.row(i).dot(weight_sample.row(s)));
    prob /= static_cast<double>(draws);
    const int label = data.test_labels[i];
    const int predicted = prob > 0.5 ? 1 : 0;
    if (predicted == label) ++hits;
    const double p_label = label == 1 ? prob : 1.0 - prob;
    ll += std::log(std::max(p_label, 1e-300));
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(tests);
  out.log_likelihood = ll / static_cast<double>(tests);
  return out;
}

}  // namespace wnewton::harness
