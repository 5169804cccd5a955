#include "wnewton/score.hpp"

#include <algorithm>
#include <cmath>

namespace wnewton::score {

double median_bandwidth(const ParticleEnsemble& ensemble) {
  const int n = ensemble.count();
  if (n < 2) throw InvalidInput("median_bandwidth: need at least two particles");

  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      dists.push_back((ensemble.positions.row(i) - ensemble.positions.row(j)).norm());

  const std::size_t m = dists.size();
  const std::size_t mid = m / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  double med = dists[mid];
  if (m % 2 == 0) {
    // even count: average the two middle order statistics
    const double hi = med;
    std::nth_element(dists.begin(), dists.begin() + (mid - 1), dists.begin() + mid);
    med = 0.5 * (dists[mid - 1] + hi);
  }
  if (med <= 0.0)
    throw DegenerateBandwidth("median_bandwidth: all particles coincide");
  return med * med / std::log(static_cast<double>(n));
}

ScoreEstimate kde_score(const ParticleEnsemble& ensemble, const KernelSpec& kernel,
                        const Eigen::MatrixXd& at) {
  if (!(kernel.bandwidth > 0.0)) throw InvalidConfig("kde_score: bandwidth must be positive");
  check_finite(ensemble);
  const int n = ensemble.count();
  const int d = ensemble.dim();
  if (at.cols() != d) throw InvalidInput("kde_score: query dimension mismatch");
  const double h = kernel.bandwidth;

  // Below this log-weight even the largest kernel value underflows a double.
  constexpr double kUnderflowLog = -700.0;

  ScoreEstimate out;
  out.values.setZero(at.rows(), d);
  out.underflow.assign(static_cast<std::size_t>(at.rows()), 0);

  Eigen::VectorXd logw(n);
  for (Eigen::Index q = 0; q < at.rows(); ++q) {
    const Eigen::RowVectorXd x = at.row(q);
    for (int i = 0; i < n; ++i)
      logw[i] = -(x - ensemble.positions.row(i)).squaredNorm() / (2.0 * h);
    const double shift = logw.maxCoeff();
    if (shift < kUnderflowLog) {
      out.underflow[static_cast<std::size_t>(q)] = 1;
      continue;
    }
    double den = 0.0;
    Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(d);
    for (int i = 0; i < n; ++i) {
      const double w = std::exp(logw[i] - shift);
      den += w;
      num += w * (ensemble.positions.row(i) - x);
    }
    out.values.row(q) = num / (den * h);
  }
  return out;
}

double MedianBandwidth::select(const ParticleEnsemble& ensemble) const {
  try {
    return std::max(median_bandwidth(ensemble), floor);
  } catch (const DegenerateBandwidth&) {
    return floor;
  }
}

std::shared_ptr<const BandwidthSelector> default_bandwidth_selector() {
  static const auto selector = std::make_shared<const MedianBandwidth>();
  return selector;
}

}  // namespace wnewton::score
