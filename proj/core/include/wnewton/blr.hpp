#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>

#include "wnewton/types.hpp"

namespace wnewton::harness {

struct BlrDataset {
  Eigen::MatrixXd train_features;
  Eigen::VectorXi train_labels;  // in {0, 1}
  Eigen::MatrixXd test_features;
  Eigen::VectorXi test_labels;
  int batch_size = 0;  // 0 = full batch
};

/// Synthetic logistic-regression data from a known weight vector.
BlrDataset make_synthetic_blr(int dim, int train_count, int test_count, std::uint64_t seed);

/// CSV ingestion: header row, one numeric row per sample, last column is the
/// label in {0, 1}. `train_fraction` of the rows become the training split.
BlrDataset read_blr_csv(const std::string& path, double train_fraction = 0.5);

/// Bayesian logistic-regression posterior with Gaussian prior N(0, prior_scale^2 I).
/// The potential is the scaled mini-batch negative log-likelihood plus the
/// prior term; with a full batch it is the exact negative log-posterior.
/// Resampling the batch changes the model callables in place (they share
/// state with this object).
class BlrPosterior {
 public:
  BlrPosterior(BlrDataset dataset, double prior_scale);

  /// Mini-batch drawn without replacement, keyed by (seed, iteration).
  void resample_batch(std::uint64_t seed, int iteration);
  void use_full_batch();

  TargetModel model() const;
  const BlrDataset& dataset() const;
  double prior_scale() const;

 private:
  struct State;
  std::shared_ptr<State> state_;
};

}  // namespace wnewton::harness
