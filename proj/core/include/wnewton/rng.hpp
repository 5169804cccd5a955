#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

namespace wnewton {

/// Purpose tags so independent random streams never collide on the same
/// (seed, iteration) pair.
enum class RngStream : std::uint64_t {
  Init = 1,
  StepNoise = 2,
  Batch = 3,
  Anchors = 4,
  Reference = 5,
  Generic = 6,
};

/// Counter-based splittable generator. Every consumer derives its own
/// stream from (seed, stream/iteration, substream/particle), so the order
/// in which particles are processed cannot change the numbers they see.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0) {
    state_ = mix(seed ^ 0x2545f4914f6cdd1dULL);
    state_ = mix(state_ ^ (stream + 0x9e3779b97f4a7c15ULL));
    state_ = mix(state_ ^ (substream + 0xbf58476d1ce4e5b9ULL));
  }

  Rng(std::uint64_t seed, RngStream tag, std::uint64_t iteration, std::uint64_t substream)
      : Rng(seed, (static_cast<std::uint64_t>(tag) << 56) ^ iteration, substream) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform in the open interval (0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  Eigen::VectorXd normal_vector(int dim) {
    Eigen::VectorXd out(dim);
    for (int i = 0; i < dim; ++i) out[i] = normal();
    return out;
  }

  /// Uniform integer in [0, bound) by rejection, bound > 0.
  std::uint64_t uniform_below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t draw;
    do {
      draw = next_u64();
    } while (draw >= limit);
    return draw % bound;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace wnewton
