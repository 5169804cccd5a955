#include "wnewton/newton_kernel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "wnewton/rng.hpp"

namespace wnewton::kernel {

namespace {

// Mixed partials of k(x,y) = (2 pi h)^(-d/2) exp(-|x-y|^2/(2h)) in terms of
// a = (x - y)/h. Derivatives in x pull down -a, in y pull down +a.

void fill_gg_block(Eigen::Ref<Eigen::MatrixXd> block, const Eigen::VectorXd& a, double kval,
                   double inv_h) {
  // d_{x_i} d_{y_j} k = (delta_ij / h - a_i a_j) k
  block.noalias() = -kval * (a * a.transpose());
  block.diagonal().array() += kval * inv_h;
}

void fill_gh_block(Eigen::Ref<Eigen::MatrixXd> block, const Eigen::VectorXd& a, double kval,
                   double inv_h) {
  // d_{x_i} d_{y_j1} d_{y_j2} k =
  //   ((d_{i j1} a_j2 + d_{i j2} a_j1 + d_{j1 j2} a_i)/h - a_i a_j1 a_j2) k
  const int d = static_cast<int>(a.size());
  for (int i = 0; i < d; ++i)
    for (int j1 = 0; j1 < d; ++j1)
      for (int j2 = 0; j2 < d; ++j2) {
        double val = -a[i] * a[j1] * a[j2];
        if (i == j1) val += a[j2] * inv_h;
        if (i == j2) val += a[j1] * inv_h;
        if (j1 == j2) val += a[i] * inv_h;
        block(i, j1 * d + j2) = kval * val;
      }
}

void fill_hh_block(Eigen::Ref<Eigen::MatrixXd> block, const Eigen::VectorXd& a, double kval,
                   double inv_h) {
  // d_{x_i1} d_{x_i2} d_{y_j1} d_{y_j2} k, quartic Hermite-type polynomial in a
  const int d = static_cast<int>(a.size());
  for (int i1 = 0; i1 < d; ++i1)
    for (int i2 = 0; i2 < d; ++i2)
      for (int j1 = 0; j1 < d; ++j1)
        for (int j2 = 0; j2 < d; ++j2) {
          double val = a[i1] * a[i2] * a[j1] * a[j2];
          double pair2 = 0.0;
          if (i1 == i2) pair2 += a[j1] * a[j2];
          if (i1 == j1) pair2 += a[i2] * a[j2];
          if (i1 == j2) pair2 += a[i2] * a[j1];
          if (i2 == j1) pair2 += a[i1] * a[j2];
          if (i2 == j2) pair2 += a[i1] * a[j1];
          if (j1 == j2) pair2 += a[i1] * a[i2];
          val -= pair2 * inv_h;
          double pair4 = 0.0;
          if (i1 == j2 && i2 == j1) pair4 += 1.0;
          if (i1 == j1 && i2 == j2) pair4 += 1.0;
          if (i1 == i2 && j1 == j2) pair4 += 1.0;
          val += pair4 * inv_h * inv_h;
          block(i1 * d + i2, j1 * d + j2) = kval * val;
        }
}

double kernel_norm(double h, int d) {
  return std::pow(2.0 * M_PI * h, -0.5 * static_cast<double>(d));
}

struct CrossBlocks {
  Eigen::MatrixXd gg;  // (Ma d) x (N d): first argument at anchors
  Eigen::MatrixXd gh;  // (Ma d) x (N d^2)
};

CrossBlocks assemble_cross(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& points,
                           double h) {
  const int ma = static_cast<int>(anchors.rows());
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());
  const double norm = kernel_norm(h, d);
  const double inv_h = 1.0 / h;

  CrossBlocks out;
  out.gg.resize(ma * d, n * d);
  out.gh.resize(ma * d, n * d * d);
  Eigen::VectorXd a(d);
  for (int m = 0; m < ma; ++m)
    for (int j = 0; j < n; ++j) {
      a = (anchors.row(m) - points.row(j)).transpose() * inv_h;
      const double kval = norm * std::exp(-0.5 * h * a.squaredNorm());
      fill_gg_block(out.gg.block(m * d, j * d, d, d), a, kval, inv_h);
      fill_gh_block(out.gh.block(m * d, j * d * d, d, d * d), a, kval, inv_h);
    }
  return out;
}

// Shared normal-equation solve for the beta = 0 representation anchored at
// a subset (or all) of the particles:
//   (B B' + A H A' + N lambda G) alpha = A v + B e,  field = A' alpha
Direction solve_anchored(const CrossBlocks& cross, const Eigen::MatrixXd& anchor_gg,
                         const Rhs& rhs, double lambda,
                         const std::vector<Eigen::MatrixXd>& hessians, int n, int d) {
  const Eigen::Index rows = cross.gg.rows();
  Eigen::MatrixXd hess_at = cross.gg.transpose();  // (N d) x (Ma d)
  for (int j = 0; j < n; ++j)
    hess_at.middleRows(j * d, d) = hessians[static_cast<std::size_t>(j)] *
                                   hess_at.middleRows(j * d, d);

  Eigen::MatrixXd system = cross.gh * cross.gh.transpose();
  system.noalias() += cross.gg * hess_at;
  system.noalias() += static_cast<double>(n) * lambda * anchor_gg;
  system = 0.5 * (system + system.transpose()).eval();

  const Eigen::VectorXd b = cross.gg * rhs.drift + cross.gh * rhs.identity;

  Direction dir;
  Eigen::VectorXd alpha(rows);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
  bool ok = ldlt.info() == Eigen::Success;
  if (ok) {
    alpha = ldlt.solve(b);
    dir.residual = (system * alpha - b).norm();
    ok = dir.residual <= 1e-8 * (1.0 + b.norm());
  }
  if (!ok) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(system);
    const Eigen::VectorXd evals = es.eigenvalues();
    const double cutoff = 1e-10 * evals.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(rows);
    for (Eigen::Index i = 0; i < rows; ++i)
      if (std::abs(evals[i]) > cutoff) inv[i] = 1.0 / evals[i];
    alpha = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * b;
    dir.used_pseudo_inverse = true;
    dir.residual = (system * alpha - b).norm();
  }

  dir.alpha = alpha;
  const Eigen::VectorXd field_flat = cross.gg.transpose() * alpha;
  dir.field = Eigen::Map<const Eigen::MatrixXd>(field_flat.data(), d, n).transpose();
  return dir;
}

}  // namespace

Blocks kernel_derivative_blocks(const ParticleEnsemble& ensemble,
                                const score::KernelSpec& kernel, BlockOrder order,
                                int full_cap) {
  check_finite(ensemble);
  if (!(kernel.bandwidth > 0.0))
    throw InvalidConfig("kernel_derivative_blocks: bandwidth must be positive");
  const int n = ensemble.count();
  const int d = ensemble.dim();
  if (order == BlockOrder::Full && n * d * d > full_cap)
    throw CapacityError(
        "kernel_derivative_blocks: N*d^2 exceeds the full-mode cap; use the reduced or "
        "sparse-anchor solver");

  const double h = kernel.bandwidth;
  const double norm = kernel_norm(h, d);
  const double inv_h = 1.0 / h;

  Blocks blocks;
  blocks.count = n;
  blocks.dim = d;
  blocks.bandwidth = h;
  blocks.points = ensemble.positions;
  blocks.gg.resize(n * d, n * d);
  blocks.gh.resize(n * d, n * d * d);
  if (order == BlockOrder::Full) {
    blocks.hh.resize(n * d * d, n * d * d);
    blocks.has_hh = true;
  }

  Eigen::VectorXd a(d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      a = (ensemble.positions.row(i) - ensemble.positions.row(j)).transpose() * inv_h;
      const double kval = norm * std::exp(-0.5 * h * a.squaredNorm());
      fill_gg_block(blocks.gg.block(i * d, j * d, d, d), a, kval, inv_h);
      fill_gh_block(blocks.gh.block(i * d, j * d * d, d, d * d), a, kval, inv_h);
      if (blocks.has_hh)
        fill_hh_block(blocks.hh.block(i * d * d, j * d * d, d * d, d * d), a, kval, inv_h);
    }
  blocks.hg = blocks.gh.transpose();
  return blocks;
}

Rhs assemble_rhs(const ParticleEnsemble& ensemble, const TargetModel& model) {
  const int n = ensemble.count();
  const int d = ensemble.dim();
  Rhs rhs;
  rhs.drift.resize(n * d);
  rhs.identity.resize(n * d * d);
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const Eigen::VectorXd eye_flat = Eigen::Map<const Eigen::VectorXd>(eye.data(), d * d);
  for (int i = 0; i < n; ++i) {
    rhs.drift.segment(i * d, d) = -model.gradient(ensemble.positions.row(i).transpose());
    rhs.identity.segment(i * d * d, d * d) = eye_flat;
  }
  return rhs;
}

std::vector<Eigen::MatrixXd> particle_hessians(const ParticleEnsemble& ensemble,
                                               const TargetModel& model) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(ensemble.count()));
  for (int i = 0; i < ensemble.count(); ++i) {
    Eigen::MatrixXd h = model.hessian(ensemble.positions.row(i).transpose());
    out.push_back(0.5 * (h + h.transpose()));
  }
  return out;
}

Direction solve_full(const Blocks& blocks, const Rhs& rhs, double lambda,
                     const std::vector<Eigen::MatrixXd>& hessians) {
  if (!blocks.has_hh)
    throw StateError("solve_full: blocks were not assembled in full mode");
  const int n = blocks.count;
  const int d = blocks.dim;
  const Eigen::Index nd = static_cast<Eigen::Index>(n) * d;
  const Eigen::Index ndd = static_cast<Eigen::Index>(n) * d * d;
  const Eigen::Index total = nd + ndd;

  Eigen::MatrixXd gram(total, total);
  gram.topLeftCorner(nd, nd) = blocks.gg;
  gram.topRightCorner(nd, ndd) = blocks.gh;
  gram.bottomLeftCorner(ndd, nd) = blocks.hg;
  gram.bottomRightCorner(ndd, ndd) = blocks.hh;

  Eigen::MatrixXd hess_stack(total, nd);  // [gg; hg] with hessians applied on the right
  hess_stack.topRows(nd) = blocks.gg;
  hess_stack.bottomRows(ndd) = blocks.hg;
  Eigen::MatrixXd hess_applied = hess_stack.transpose();
  for (int j = 0; j < n; ++j)
    hess_applied.middleRows(j * d, d) =
        hessians[static_cast<std::size_t>(j)] * hess_applied.middleRows(j * d, d);

  Eigen::MatrixXd second_stack(total, ndd);  // [gh; hh]
  second_stack.topRows(nd) = blocks.gh;
  second_stack.bottomRows(ndd) = blocks.hh;

  Eigen::MatrixXd system = second_stack * second_stack.transpose();
  system.noalias() += hess_stack * hess_applied;
  system.noalias() += static_cast<double>(n) * lambda * gram;
  system = 0.5 * (system + system.transpose()).eval();

  Eigen::VectorXd stacked(total);
  stacked.head(nd) = rhs.drift;
  stacked.tail(ndd) = rhs.identity;
  const Eigen::VectorXd b = gram * stacked;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(system);
  const Eigen::VectorXd evals = es.eigenvalues();
  const double cutoff = 1e-10 * evals.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(total);
  for (Eigen::Index i = 0; i < total; ++i)
    if (std::abs(evals[i]) > cutoff) inv[i] = 1.0 / evals[i];
  const Eigen::VectorXd sol =
      es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * b;

  Direction dir;
  dir.alpha = sol.head(nd);
  dir.beta = sol.tail(ndd);
  dir.used_pseudo_inverse = true;
  dir.residual = (system * sol - b).norm();
  const Eigen::VectorXd field_flat = blocks.gg * dir.alpha + blocks.gh * dir.beta;
  dir.field = Eigen::Map<const Eigen::MatrixXd>(field_flat.data(), d, n).transpose();
  return dir;
}

Direction solve_reduced(const Blocks& blocks, const Rhs& rhs, double lambda,
                        const std::vector<Eigen::MatrixXd>& hessians) {
  CrossBlocks cross;
  cross.gg = blocks.gg;
  cross.gh = blocks.gh;
  Direction dir = solve_anchored(cross, blocks.gg, rhs, lambda, hessians, blocks.count,
                                 blocks.dim);
  dir.anchors.resize(static_cast<std::size_t>(blocks.count));
  for (int i = 0; i < blocks.count; ++i) dir.anchors[static_cast<std::size_t>(i)] = i;
  return dir;
}

Direction solve_block_diagonal(const Blocks& blocks, const Rhs& rhs, double lambda,
                               const std::vector<Eigen::MatrixXd>& hessians) {
  if (!(lambda > 0.0))
    throw InvalidConfig("solve_block_diagonal: lambda must be positive");
  const int n = blocks.count;
  const int d = blocks.dim;
  const int dd = d * d;

  const Eigen::VectorXd b = blocks.gg * rhs.drift + blocks.gh * rhs.identity;

  Direction dir;
  Eigen::VectorXd alpha(n * d);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd block = static_cast<double>(n) * lambda * blocks.gg.block(i * d, i * d, d, d);
    for (int j = 0; j < n; ++j) {
      const auto gh_ij = blocks.gh.block(i * d, j * dd, d, dd);
      const auto gg_ij = blocks.gg.block(i * d, j * d, d, d);
      block.noalias() += gh_ij * gh_ij.transpose();
      block.noalias() += gg_ij * hessians[static_cast<std::size_t>(j)] * gg_ij.transpose();
    }
    block = 0.5 * (block + block.transpose()).eval();
    const Eigen::VectorXd bi = b.segment(i * d, d);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(block);
    bool ok = ldlt.info() == Eigen::Success;
    Eigen::VectorXd ai;
    if (ok) {
      ai = ldlt.solve(bi);
      ok = (block * ai - bi).norm() <= 1e-8 * (1.0 + bi.norm());
    }
    if (!ok) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block);
      const Eigen::VectorXd evals = es.eigenvalues();
      const double cutoff = 1e-10 * evals.cwiseAbs().maxCoeff();
      Eigen::VectorXd inv = Eigen::VectorXd::Zero(d);
      for (int k = 0; k < d; ++k)
        if (std::abs(evals[k]) > cutoff) inv[k] = 1.0 / evals[k];
      ai = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * bi;
      dir.used_pseudo_inverse = true;
    }
    dir.residual = std::max(dir.residual, (block * ai - bi).norm());
    alpha.segment(i * d, d) = ai;
  }

  dir.alpha = alpha;
  const Eigen::VectorXd field_flat = blocks.gg * alpha;
  dir.field = Eigen::Map<const Eigen::MatrixXd>(field_flat.data(), d, n).transpose();
  dir.anchors.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) dir.anchors[static_cast<std::size_t>(i)] = i;
  return dir;
}

std::vector<int> sample_anchors(const ParticleEnsemble& ensemble, int anchor_count,
                                std::uint64_t seed) {
  const int n = ensemble.count();
  if (anchor_count < 1 || anchor_count > n)
    throw InvalidConfig("sample_anchors: anchor count must be in [1, N]");
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  Rng rng(seed, RngStream::Anchors, static_cast<std::uint64_t>(ensemble.iteration), 0);
  for (int i = 0; i < anchor_count; ++i) {
    const int j = i + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(anchor_count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

Direction solve_sparse_anchors(const ParticleEnsemble& ensemble,
                               const score::KernelSpec& kernel,
                               const std::vector<int>& anchors, const Rhs& rhs, double lambda,
                               const std::vector<Eigen::MatrixXd>& hessians) {
  check_finite(ensemble);
  const int n = ensemble.count();
  const int d = ensemble.dim();
  const int ma = static_cast<int>(anchors.size());
  if (ma < 1 || ma > n) throw InvalidConfig("solve_sparse_anchors: bad anchor set");

  Eigen::MatrixXd anchor_points(ma, d);
  for (int m = 0; m < ma; ++m) anchor_points.row(m) = ensemble.positions.row(anchors[static_cast<std::size_t>(m)]);

  const CrossBlocks cross = assemble_cross(anchor_points, ensemble.positions, kernel.bandwidth);
  const CrossBlocks anchor_self = assemble_cross(anchor_points, anchor_points, kernel.bandwidth);

  Direction dir = solve_anchored(cross, anchor_self.gg, rhs, lambda, hessians, n, d);
  dir.anchors = anchors;
  return dir;
}

Eigen::MatrixXd evaluate_field(const KernelCoefficients& coeffs, const Eigen::MatrixXd& at) {
  const int ma = static_cast<int>(coeffs.anchors.rows());
  const int d = static_cast<int>(coeffs.anchors.cols());
  const double h = coeffs.bandwidth;
  const double norm = kernel_norm(h, d);
  const double inv_h = 1.0 / h;
  const bool with_beta = coeffs.beta.size() > 0;

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(at.rows(), d);
  Eigen::VectorXd a(d);
  Eigen::MatrixXd gg(d, d), gh(d, d * d);
  for (Eigen::Index q = 0; q < at.rows(); ++q) {
    for (int m = 0; m < ma; ++m) {
      a = (coeffs.anchors.row(m) - at.row(q)).transpose() * inv_h;
      const double kval = norm * std::exp(-0.5 * h * a.squaredNorm());
      fill_gg_block(gg, a, kval, inv_h);
      out.row(q) += coeffs.alpha.segment(m * d, d).transpose() * gg;
      if (with_beta) {
        fill_gh_block(gh, a, kval, inv_h);
        // the (hess_first, grad_second) block at (zm, x) is -gh(zm, x) transposed,
        // the gh entries being odd in a
        out.row(q) -= (gh * coeffs.beta.segment(m * d * d, d * d)).transpose();
      }
    }
  }
  return out;
}

}  // namespace wnewton::kernel
