#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "wnewton/types.hpp"

namespace testutil {

/// Least-squares slope of log|values| against times: values ~ C e^{-rate t}
/// returns the positive decay rate.
inline double fit_decay_rate(const std::vector<double>& times, const std::vector<double>& values) {
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double v = std::abs(values[i]);
    if (v <= 0.0) continue;
    const double y = std::log(v);
    st += times[i];
    sy += y;
    stt += times[i] * times[i];
    sty += times[i] * y;
    ++used;
  }
  const double denom = used * stt - st * st;
  return -(used * sty - st * sy) / denom;
}

inline wnewton::ParticleEnsemble ensemble_from(const Eigen::MatrixXd& positions,
                                               std::uint64_t seed = 0) {
  wnewton::ParticleEnsemble ens;
  ens.positions = positions;
  ens.seed = seed;
  return ens;
}

}  // namespace testutil
