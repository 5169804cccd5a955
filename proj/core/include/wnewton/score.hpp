#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "wnewton/types.hpp"

namespace wnewton::score {

/// Gaussian kernel k(x,y) = (2 pi h)^(-d/2) exp(-|x-y|^2 / (2h)), with the
/// bandwidth h in squared-length-scale units.
struct KernelSpec {
  double bandwidth = 1.0;
};

inline constexpr double kMinBandwidth = 1e-8;

/// Score estimate xi(x) ~ grad log rho at the query points, one row each.
/// Rows whose kernel-density denominator underflows are zeroed and flagged.
struct ScoreEstimate {
  Eigen::MatrixXd values;
  std::vector<std::uint8_t> underflow;

  bool any_underflow() const {
    for (auto f : underflow)
      if (f) return true;
    return false;
  }
};

/// med^2 / log N over all pairwise Euclidean distances. Throws
/// DegenerateBandwidth when every particle coincides; callers fall back to
/// kMinBandwidth.
double median_bandwidth(const ParticleEnsemble& ensemble);

/// Gradient of the log KDE density: xi(x) = sum_i grad_x k(x,x_i) / sum_i k(x,x_i).
/// Evaluated with a log-sum-exp shift so large clouds and small bandwidths
/// do not overflow.
ScoreEstimate kde_score(const ParticleEnsemble& ensemble, const KernelSpec& kernel,
                        const Eigen::MatrixXd& at);

/// Pluggable bandwidth selection.
struct BandwidthSelector {
  virtual ~BandwidthSelector() = default;
  virtual double select(const ParticleEnsemble& ensemble) const = 0;
};

/// Median selection with a floor for collapsed ensembles.
struct MedianBandwidth final : BandwidthSelector {
  double floor = kMinBandwidth;
  double select(const ParticleEnsemble& ensemble) const override;
};

std::shared_ptr<const BandwidthSelector> default_bandwidth_selector();

}  // namespace wnewton::score
