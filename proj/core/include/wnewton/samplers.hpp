#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wnewton/newton_affine.hpp"
#include "wnewton/newton_kernel.hpp"
#include "wnewton/score.hpp"
#include "wnewton/types.hpp"

namespace wnewton::samplers {

enum class Method { Old, Wgf, Svgd, Halld, WNewtonAffine, WNewtonKernel };

Method method_from_name(const std::string& name);
std::string method_name(Method method);

/// How the hybrid update mixes in the gradient direction: Stochastic adds
/// Langevin noise, Deterministic uses the score in place of noise.
enum class HybridVariant { Stochastic, Deterministic };

/// Where the score estimate comes from. GaussianFit uses the ensemble's
/// moment-matched Gaussian; TargetExact uses the model's exact_score. Both
/// are oracle modes used by tests and rate studies.
enum class ScoreSource { Kde, GaussianFit, TargetExact };

enum class KernelSolver { Reduced, BlockDiagonal, SparseAnchors, Full };

struct Schedule {
  double decay = 1.0;
  int period = 0;  // 0 disables decay

  double at(int iteration, double alpha0) const;
};

struct SamplerConfig {
  Method method = Method::Wgf;
  double alpha0 = 0.1;
  Schedule schedule;
  double gamma = 0.0;
  double epsilon = 0.0;
  double lambda = 1e-3;
  HybridVariant hybrid = HybridVariant::Stochastic;
  ScoreSource score_source = ScoreSource::Kde;
  KernelSolver kernel_solver = KernelSolver::Reduced;
  int anchor_count = 0;  // SparseAnchors only; 0 means N/4
  std::shared_ptr<const score::BandwidthSelector> bandwidth =
      score::default_bandwidth_selector();
  int max_iterations = 1;
  std::uint64_t seed = 0;
  int snapshot_every = 0;  // record the ensemble every k iterations; 0 = none
};

struct IterationRecord {
  int iteration = 0;
  double alpha = 0.0;
  double bandwidth = 0.0;
  double wall_seconds = 0.0;
  Eigen::VectorXd mean;
  int flagged_particles = 0;  // HALLD singular-Hessian skips
};

struct Trajectory {
  std::vector<IterationRecord> records;
  std::vector<ParticleEnsemble> snapshots;  // initial state always included
  ParticleEnsemble final_state;
  std::optional<std::string> error;  // set when a solver failed and the run truncated
  int completed_iterations = 0;
};

/// Euler-Maruyama step of overdamped Langevin dynamics:
/// x <- x - alpha grad f + sqrt(2 alpha) z. The noise is keyed by
/// (seed, iteration, particle); `zero_noise` is a test hook.
ParticleEnsemble step_old(const ParticleEnsemble& ensemble, const TargetModel& model,
                          double alpha, bool zero_noise = false);

/// Deterministic Wasserstein gradient step: x <- x + alpha (-grad f - xi).
ParticleEnsemble step_wgf(const ParticleEnsemble& ensemble, const TargetModel& model,
                          const score::ScoreEstimate& score, double alpha);

struct AdagradState {
  Eigen::MatrixXd accumulator;  // running sum of squared updates
};

/// Stein variational step with per-coordinate Adagrad scaling.
ParticleEnsemble step_svgd(const ParticleEnsemble& ensemble, const TargetModel& model,
                           const score::KernelSpec& kernel, double alpha, AdagradState& state);

/// Hessian-preconditioned Lagrangian step:
/// x <- x + alpha (hess f)^-1 (-grad f - xi). Particles with a singular
/// Hessian are flagged and left in place.
ParticleEnsemble step_halld(const ParticleEnsemble& ensemble, const TargetModel& model,
                            const score::ScoreEstimate& score, double alpha,
                            std::vector<int>* singular = nullptr);

/// Hybrid Newton step. Stochastic variant:
///   x <- x + alpha dPhi - gamma alpha grad f + sqrt(2 gamma alpha) z;
/// deterministic variant replaces the noise by the score term. With
/// gamma = 0 both reduce to the pure Newton update, bit for bit.
ParticleEnsemble step_wnewton(const ParticleEnsemble& ensemble, const TargetModel& model,
                              const Eigen::MatrixXd& direction, double alpha, double gamma,
                              HybridVariant variant,
                              const Eigen::MatrixXd* score_values = nullptr,
                              bool zero_noise = false);

/// Score estimate at the particles according to the configured source.
score::ScoreEstimate compute_score(const ParticleEnsemble& ensemble, const TargetModel& model,
                                   ScoreSource source, double bandwidth);

/// Newton direction for the configured solver (affine or kernel family).
DirectionField solve_direction(const ParticleEnsemble& ensemble, const TargetModel& model,
                               const score::ScoreEstimate& score, const SamplerConfig& config,
                               double bandwidth);

using IterationCallback = std::function<void(int iteration, const ParticleEnsemble&)>;

/// Runs K iterations of the configured method: bandwidth selection, score
/// estimate, direction solve for the Newton methods, step, schedule update.
/// Deterministic given the seed. A solver failure truncates the trajectory
/// and records the error.
Trajectory run(const SamplerConfig& config, const TargetModel& model,
               ParticleEnsemble ensemble, const IterationCallback& on_iteration = {});

}  // namespace wnewton::samplers
