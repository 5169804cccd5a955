#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "wnewton/score.hpp"
#include "wnewton/types.hpp"

namespace wnewton::kernel {

/// Gaussian-kernel derivative blocks between particles. Naming is by
/// derivative order per argument: gg = (grad_x, grad_y), gh = (grad_x,
/// hess_y), hg = gh' exactly, hh = (hess_x, hess_y), assembled in full mode
/// only. Block (n, n') rows/cols are particle-major.
struct Blocks {
  int count = 0;
  int dim = 0;
  double bandwidth = 0.0;
  Eigen::MatrixXd points;  // the ensemble the blocks were assembled from
  Eigen::MatrixXd gg;      // Nd x Nd
  Eigen::MatrixXd gh;      // Nd x Nd^2
  Eigen::MatrixXd hg;      // Nd^2 x Nd
  Eigen::MatrixXd hh;      // Nd^2 x Nd^2 when full
  bool has_hh = false;
};

enum class BlockOrder { Reduced, Full };

inline constexpr int kDefaultFullCap = 4096;  // cap on N * d^2 in full mode

/// Analytic mixed partials of the Gaussian kernel up to order 2 (reduced)
/// or order 4 (full).
Blocks kernel_derivative_blocks(const ParticleEnsemble& ensemble,
                                const score::KernelSpec& kernel, BlockOrder order,
                                int full_cap = kDefaultFullCap);

struct Rhs {
  Eigen::VectorXd drift;     // stacked -grad f(x_i), size Nd
  Eigen::VectorXd identity;  // stacked vec(I_d), size Nd^2
};

Rhs assemble_rhs(const ParticleEnsemble& ensemble, const TargetModel& model);

/// Per-particle potential Hessians, symmetrized.
std::vector<Eigen::MatrixXd> particle_hessians(const ParticleEnsemble& ensemble,
                                               const TargetModel& model);

struct Direction {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;    // empty outside full mode
  Eigen::MatrixXd field;   // N x d, grad Phi at the particles
  std::vector<int> anchors;
  bool used_pseudo_inverse = false;
  double residual = 0.0;
};

/// Full-representation solve of the regularized normal equations in
/// (alpha, beta), via pseudo-inverse with relative cutoff 1e-10.
Direction solve_full(const Blocks& blocks, const Rhs& rhs, double lambda,
                     const std::vector<Eigen::MatrixXd>& hessians);

/// beta = 0 restriction:
/// alpha = (gh gh' + gg H gg + N lambda gg)^-1 (gg v + gh e).
Direction solve_reduced(const Blocks& blocks, const Rhs& rhs, double lambda,
                        const std::vector<Eigen::MatrixXd>& hessians);

/// Block-diagonal approximation of the reduced system matrix; each d x d
/// block is solved independently. Requires lambda > 0.
Direction solve_block_diagonal(const Blocks& blocks, const Rhs& rhs, double lambda,
                               const std::vector<Eigen::MatrixXd>& hessians);

/// Uniform sample of `anchor_count` particle indices without replacement,
/// returned sorted ascending (so anchor_count == N is the identity set).
std::vector<int> sample_anchors(const ParticleEnsemble& ensemble, int anchor_count,
                                std::uint64_t seed);

/// Reduced solve with the representation restricted to the given anchors.
Direction solve_sparse_anchors(const ParticleEnsemble& ensemble,
                               const score::KernelSpec& kernel,
                               const std::vector<int>& anchors, const Rhs& rhs, double lambda,
                               const std::vector<Eigen::MatrixXd>& hessians);

/// grad Phi at arbitrary query points from the coefficient payload.
Eigen::MatrixXd evaluate_field(const KernelCoefficients& coeffs, const Eigen::MatrixXd& at);

}  // namespace wnewton::kernel
