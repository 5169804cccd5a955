#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "wnewton/gaussian.hpp"
#include "wnewton/newton_affine.hpp"
#include "wnewton/newton_kernel.hpp"
#include "wnewton/rng.hpp"
#include "wnewton/score.hpp"
#include "wnewton/targets.hpp"

using namespace wnewton;

namespace {

ParticleEnsemble gaussian_cloud(int n, int d, std::uint64_t seed) {
  Rng rng(seed, RngStream::Generic, 0, 0);
  ParticleEnsemble ens;
  ens.positions.resize(n, d);
  for (int i = 0; i < n; ++i) ens.positions.row(i) = rng.normal_vector(d).transpose();
  return ens;
}

TargetModel gauss_nd(int d) {
  harness::ParamMap params;
  params.values["dim"] = d;
  return harness::build_target("gaussNd", params);
}

void bench_kernel_blocks(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const auto ens = gaussian_cloud(n, d, 1);
  const score::KernelSpec spec{score::median_bandwidth(ens)};
  for (auto _ : state) {
    auto blocks = kernel::kernel_derivative_blocks(ens, spec, kernel::BlockOrder::Reduced);
    benchmark::DoNotOptimize(blocks.gg.data());
  }
}

void bench_kernel_reduced(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const auto ens = gaussian_cloud(n, d, 1);
  const auto model = gauss_nd(d);
  const score::KernelSpec spec{score::median_bandwidth(ens)};
  const auto blocks = kernel::kernel_derivative_blocks(ens, spec, kernel::BlockOrder::Reduced);
  const auto rhs = kernel::assemble_rhs(ens, model);
  const auto hessians = kernel::particle_hessians(ens, model);
  for (auto _ : state) {
    auto dir = kernel::solve_reduced(blocks, rhs, 1e-3, hessians);
    benchmark::DoNotOptimize(dir.alpha.data());
  }
}

void bench_kernel_block_diagonal(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const auto ens = gaussian_cloud(n, d, 1);
  const auto model = gauss_nd(d);
  const score::KernelSpec spec{score::median_bandwidth(ens)};
  const auto blocks = kernel::kernel_derivative_blocks(ens, spec, kernel::BlockOrder::Reduced);
  const auto rhs = kernel::assemble_rhs(ens, model);
  const auto hessians = kernel::particle_hessians(ens, model);
  for (auto _ : state) {
    auto dir = kernel::solve_block_diagonal(blocks, rhs, 1e-3, hessians);
    benchmark::DoNotOptimize(dir.alpha.data());
  }
}

void bench_affine_assembly(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const auto ens = gaussian_cloud(n, d, 1);
  const auto model = gauss_nd(d);
  score::ScoreEstimate score;
  score.values = Eigen::MatrixXd::Zero(n, d);
  score.underflow.assign(static_cast<std::size_t>(n), 0);
  for (auto _ : state) {
    auto sys = affine::assemble_quadratic_system(ens, model, score, 0.0);
    benchmark::DoNotOptimize(sys.mat.data());
  }
}

void bench_gaussian_newton(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(3, RngStream::Generic, 0, 0);
  Eigen::MatrixXd a(d, d), b(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      a(i, j) = rng.normal();
      b(i, j) = rng.normal();
    }
  const Eigen::MatrixXd cov = a * a.transpose() + Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd target = b * b.transpose() + Eigen::MatrixXd::Identity(d, d);
  for (auto _ : state) {
    auto dir = gaussian::solve_newton_direction(cov, target);
    benchmark::DoNotOptimize(dir.data());
  }
}

void bench_kde_score(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto ens = gaussian_cloud(n, 2, 5);
  const score::KernelSpec spec{score::median_bandwidth(ens)};
  for (auto _ : state) {
    auto est = score::kde_score(ens, spec, ens.positions);
    benchmark::DoNotOptimize(est.values.data());
  }
}

}  // namespace

BENCHMARK(bench_kernel_blocks)->Args({50, 2})->Args({100, 2})->Args({200, 2});
BENCHMARK(bench_kernel_reduced)->Args({50, 2})->Args({100, 2})->Args({200, 2});
BENCHMARK(bench_kernel_block_diagonal)->Args({50, 2})->Args({100, 2})->Args({200, 2});
BENCHMARK(bench_affine_assembly)->Args({1000, 5})->Args({10000, 5});
BENCHMARK(bench_gaussian_newton)->Arg(2)->Arg(8)->Arg(16)->Arg(32);
BENCHMARK(bench_kde_score)->Arg(100)->Arg(500)->Arg(2000);
