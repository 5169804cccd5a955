#include "wnewton/samplers.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>

#include "wnewton/rng.hpp"

namespace wnewton::samplers {

Method method_from_name(const std::string& name) {
  if (name == "old") return Method::Old;
  if (name == "wgf") return Method::Wgf;
  if (name == "svgd") return Method::Svgd;
  if (name == "halld") return Method::Halld;
  if (name == "wnewton-a") return Method::WNewtonAffine;
  if (name == "wnewton-k") return Method::WNewtonKernel;
  throw InvalidConfig("unknown method: " + name);
}

std::string method_name(Method method) {
  switch (method) {
    case Method::Old: return "old";
    case Method::Wgf: return "wgf";
    case Method::Svgd: return "svgd";
    case Method::Halld: return "halld";
    case Method::WNewtonAffine: return "wnewton-a";
    case Method::WNewtonKernel: return "wnewton-k";
  }
  return "unknown";
}

double Schedule::at(int iteration, double alpha0) const {
  if (period <= 0 || decay == 1.0) return alpha0;
  return alpha0 * std::pow(decay, iteration / period);
}

ParticleEnsemble step_old(const ParticleEnsemble& ensemble, const TargetModel& model,
                          double alpha, bool zero_noise) {
  if (!(alpha >= 0.0)) throw InvalidConfig("step_old: alpha must be nonnegative");
  check_finite(ensemble);
  const int n = ensemble.count();
  const int d = ensemble.dim();
  const double noise_scale = zero_noise ? 0.0 : std::sqrt(2.0 * alpha);

  ParticleEnsemble next = ensemble;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = ensemble.positions.row(i).transpose();
    Eigen::VectorXd step = -alpha * model.gradient(x);
    if (noise_scale > 0.0) {
      Rng rng(ensemble.seed, RngStream::StepNoise,
              static_cast<std::uint64_t>(ensemble.iteration), static_cast<std::uint64_t>(i));
      step += noise_scale * rng.normal_vector(d);
    }
    next.positions.row(i) += step.transpose();
  }
  next.iteration = ensemble.iteration + 1;
  return next;
}

ParticleEnsemble step_wgf(const ParticleEnsemble& ensemble, const TargetModel& model,
                          const score::ScoreEstimate& score, double alpha) {
  check_finite(ensemble);
  ParticleEnsemble next = ensemble;
  for (int i = 0; i < ensemble.count(); ++i) {
    const Eigen::VectorXd x = ensemble.positions.row(i).transpose();
    next.positions.row(i) +=
        alpha * (-model.gradient(x).transpose() - score.values.row(i));
  }
  next.iteration = ensemble.iteration + 1;
  return next;
}

ParticleEnsemble step_svgd(const ParticleEnsemble& ensemble, const TargetModel& model,
                           const score::KernelSpec& kernel, double alpha, AdagradState& state) {
  check_finite(ensemble);
  const int n = ensemble.count();
  const int d = ensemble.dim();
  const double h = kernel.bandwidth;
  const double norm = std::pow(2.0 * M_PI * h, -0.5 * d);
  if (state.accumulator.rows() != n || state.accumulator.cols() != d)
    state.accumulator = Eigen::MatrixXd::Zero(n, d);

  Eigen::MatrixXd grads(n, d);
  for (int j = 0; j < n; ++j)
    grads.row(j) = model.gradient(ensemble.positions.row(j).transpose()).transpose();

  // phi(x_i) = avg_j [ k(x_j, x_i) (-grad f(x_j)) + grad_{x_j} k(x_j, x_i) ]
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::RowVectorXd diff = ensemble.positions.row(i) - ensemble.positions.row(j);
      const double kval = norm * std::exp(-diff.squaredNorm() / (2.0 * h));
      update.row(i) += kval * (-grads.row(j) + diff / h);
    }
    update.row(i) /= static_cast<double>(n);
  }

  constexpr double kFudge = 1e-6;
  state.accumulator += update.cwiseProduct(update);
  ParticleEnsemble next = ensemble;
  next.positions +=
      alpha * update.cwiseQuotient(state.accumulator.cwiseSqrt().array().matrix() +
                                   Eigen::MatrixXd::Constant(n, d, kFudge));
  next.iteration = ensemble.iteration + 1;
  return next;
}

ParticleEnsemble step_halld(const ParticleEnsemble& ensemble, const TargetModel& model,
                            const score::ScoreEstimate& score, double alpha,
                            std::vector<int>* singular) {
  check_finite(ensemble);
  const int d = ensemble.dim();
  ParticleEnsemble next = ensemble;
  for (int i = 0; i < ensemble.count(); ++i) {
    const Eigen::VectorXd x = ensemble.positions.row(i).transpose();
    const Eigen::VectorXd drift = -model.gradient(x) - score.values.row(i).transpose();
    Eigen::MatrixXd hess = model.hessian(x);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(hess);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
      // the preconditioner degenerates here; leave the particle in place
      if (singular) singular->push_back(i);
      continue;
    }
    next.positions.row(i) += alpha * lu.solve(drift).transpose();
    (void)d;
  }
  next.iteration = ensemble.iteration + 1;
  return next;
}

ParticleEnsemble step_wnewton(const ParticleEnsemble& ensemble, const TargetModel& model,
                              const Eigen::MatrixXd& direction, double alpha, double gamma,
                              HybridVariant variant, const Eigen::MatrixXd* score_values,
                              bool zero_noise) {
  check_finite(ensemble);
  if (direction.rows() != ensemble.count() || direction.cols() != ensemble.dim())
    throw InvalidInput("step_wnewton: direction shape mismatch");
  const int n = ensemble.count();
  const int d = ensemble.dim();

  ParticleEnsemble next = ensemble;
  next.positions += alpha * direction;
  if (gamma > 0.0) {
    if (variant == HybridVariant::Deterministic && score_values == nullptr)
      throw InvalidInput("step_wnewton: deterministic hybrid needs score values");
    const double noise_scale = zero_noise ? 0.0 : std::sqrt(2.0 * gamma * alpha);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x = ensemble.positions.row(i).transpose();
      Eigen::RowVectorXd extra = -gamma * alpha * model.gradient(x).transpose();
      if (variant == HybridVariant::Deterministic) {
        extra -= gamma * alpha * score_values->row(i);
      } else if (noise_scale > 0.0) {
        Rng rng(ensemble.seed, RngStream::StepNoise,
                static_cast<std::uint64_t>(ensemble.iteration), static_cast<std::uint64_t>(i));
        extra += noise_scale * rng.normal_vector(d).transpose();
      }
      next.positions.row(i) += extra;
    }
  }
  next.iteration = ensemble.iteration + 1;
  return next;
}

score::ScoreEstimate compute_score(const ParticleEnsemble& ensemble, const TargetModel& model,
                                   ScoreSource source, double bandwidth) {
  const int n = ensemble.count();
  const int d = ensemble.dim();
  score::ScoreEstimate est;
  switch (source) {
    case ScoreSource::Kde:
      return score::kde_score(ensemble, score::KernelSpec{bandwidth}, ensemble.positions);
    case ScoreSource::GaussianFit: {
      const Eigen::RowVectorXd mean = ensemble.positions.colwise().mean();
      const Eigen::MatrixXd centered = ensemble.positions.rowwise() - mean;
      Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
      cov.diagonal().array() += 1e-12;
      const Eigen::MatrixXd neg_prec_centered =
          -Eigen::LDLT<Eigen::MatrixXd>(cov).solve(centered.transpose());
      est.values = neg_prec_centered.transpose();
      est.underflow.assign(static_cast<std::size_t>(n), 0);
      return est;
    }
    case ScoreSource::TargetExact: {
      if (!model.exact_score)
        throw InvalidConfig("compute_score: model has no exact score");
      est.values.resize(n, d);
      for (int i = 0; i < n; ++i)
        est.values.row(i) = model.exact_score(ensemble.positions.row(i).transpose()).transpose();
      est.underflow.assign(static_cast<std::size_t>(n), 0);
      return est;
    }
  }
  throw StateError("compute_score: unreachable");
}

DirectionField solve_direction(const ParticleEnsemble& ensemble, const TargetModel& model,
                               const score::ScoreEstimate& score, const SamplerConfig& config,
                               double bandwidth) {
  DirectionField field;
  if (config.method == Method::WNewtonAffine) {
    const auto sys = affine::assemble_quadratic_system(ensemble, model, score, config.epsilon);
    const auto dir =
        affine::solve_affine_direction(sys.mat, sys.rhs, affine::default_ridge(sys.mat));
    field.vectors = affine::evaluate_affine(dir, ensemble.positions);
    field.affine = AffineCoefficients{dir.scale, dir.offset};
    return field;
  }
  if (config.method != Method::WNewtonKernel)
    throw InvalidConfig("solve_direction: not a Newton method");

  const score::KernelSpec spec{bandwidth};
  const auto rhs = kernel::assemble_rhs(ensemble, model);
  auto hessians = kernel::particle_hessians(ensemble, model);
  if (config.epsilon > 0.0)
    for (auto& h : hessians) h.diagonal().array() += config.epsilon;

  kernel::Direction dir;
  switch (config.kernel_solver) {
    case KernelSolver::Reduced: {
      const auto blocks =
          kernel::kernel_derivative_blocks(ensemble, spec, kernel::BlockOrder::Reduced);
      dir = kernel::solve_reduced(blocks, rhs, config.lambda, hessians);
      break;
    }
    case KernelSolver::BlockDiagonal: {
      const auto blocks =
          kernel::kernel_derivative_blocks(ensemble, spec, kernel::BlockOrder::Reduced);
      dir = kernel::solve_block_diagonal(blocks, rhs, config.lambda, hessians);
      break;
    }
    case KernelSolver::SparseAnchors: {
      const int m = config.anchor_count > 0 ? config.anchor_count
                                            : std::max(1, ensemble.count() / 4);
      const auto anchors = kernel::sample_anchors(ensemble, m, config.seed);
      dir = kernel::solve_sparse_anchors(ensemble, spec, anchors, rhs, config.lambda, hessians);
      break;
    }
    case KernelSolver::Full: {
      const auto blocks =
          kernel::kernel_derivative_blocks(ensemble, spec, kernel::BlockOrder::Full);
      dir = kernel::solve_full(blocks, rhs, config.lambda, hessians);
      break;
    }
  }

  field.vectors = dir.field;
  KernelCoefficients coeffs;
  coeffs.alpha = dir.alpha;
  coeffs.beta = dir.beta;
  coeffs.bandwidth = bandwidth;
  coeffs.anchors.resize(static_cast<Eigen::Index>(dir.anchors.size()), ensemble.dim());
  for (std::size_t m = 0; m < dir.anchors.size(); ++m)
    coeffs.anchors.row(static_cast<Eigen::Index>(m)) =
        ensemble.positions.row(dir.anchors[m]);
  field.kernel = std::move(coeffs);
  return field;
}

Trajectory run(const SamplerConfig& config, const TargetModel& model,
               ParticleEnsemble ensemble, const IterationCallback& on_iteration) {
  if (!(config.alpha0 > 0.0)) throw InvalidConfig("run: alpha0 must be positive");
  if (config.max_iterations < 0) throw InvalidConfig("run: negative iteration count");
  check_finite(ensemble);
  ensemble.seed = config.seed;

  Trajectory traj;
  traj.snapshots.push_back(ensemble);
  if (on_iteration) on_iteration(0, ensemble);

  const bool needs_score =
      config.method == Method::Wgf || config.method == Method::Halld ||
      config.method == Method::WNewtonAffine ||
      (config.method == Method::WNewtonKernel && config.gamma > 0.0 &&
       config.hybrid == HybridVariant::Deterministic);
  const bool needs_bandwidth = needs_score ? (config.score_source == ScoreSource::Kde) : false;
  const bool kernel_method =
      config.method == Method::WNewtonKernel || config.method == Method::Svgd;

  AdagradState adagrad;
  for (int k = 0; k < config.max_iterations; ++k) {
    const auto tic = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.iteration = k + 1;
    rec.alpha = config.schedule.at(k, config.alpha0);

    double bandwidth = 0.0;
    if (needs_bandwidth || kernel_method) bandwidth = config.bandwidth->select(ensemble);
    rec.bandwidth = bandwidth;

    try {
      score::ScoreEstimate score_est;
      if (needs_score)
        score_est = compute_score(ensemble, model, config.score_source, bandwidth);

      switch (config.method) {
        case Method::Old:
          ensemble = step_old(ensemble, model, rec.alpha);
          break;
        case Method::Wgf:
          ensemble = step_wgf(ensemble, model, score_est, rec.alpha);
          break;
        case Method::Svgd:
          ensemble = step_svgd(ensemble, model, score::KernelSpec{bandwidth}, rec.alpha, adagrad);
          break;
        case Method::Halld: {
          std::vector<int> flagged;
          ensemble = step_halld(ensemble, model, score_est, rec.alpha, &flagged);
          rec.flagged_particles = static_cast<int>(flagged.size());
          break;
        }
        case Method::WNewtonAffine:
        case Method::WNewtonKernel: {
          const DirectionField dir =
              solve_direction(ensemble, model, score_est, config, bandwidth);
          ensemble = step_wnewton(ensemble, model, dir.vectors, rec.alpha, config.gamma,
                                  config.hybrid, needs_score ? &score_est.values : nullptr);
          break;
        }
      }
    } catch (const Error& err) {
      traj.error = err.what();
      break;
    }

    rec.mean = ensemble.positions.colwise().mean().transpose();
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
    traj.records.push_back(std::move(rec));
    traj.completed_iterations = k + 1;
    if (config.snapshot_every > 0 && (k + 1) % config.snapshot_every == 0)
      traj.snapshots.push_back(ensemble);
    if (on_iteration) on_iteration(k + 1, ensemble);
  }

  traj.final_state = std::move(ensemble);
  return traj;
}

}  // namespace wnewton::samplers
