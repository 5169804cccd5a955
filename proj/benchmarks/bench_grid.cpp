#include <benchmark/benchmark.h>

#include <cmath>

#include "wnewton/grid1d.hpp"
#include "wnewton/targets.hpp"

using namespace wnewton;

namespace {

void bench_newton_ode(benchmark::State& state) {
  const int points = static_cast<int>(state.range(0));
  const auto model = harness::build_target("gauss1d");
  const auto rho = grid::make_grid_density(-6.0, 10.0, points, [](double x) {
    return std::exp(-(x - 2.0) * (x - 2.0) / 0.5);
  });
  for (auto _ : state) {
    auto result = grid::solve_w_newton_direction_kl(rho, model);
    benchmark::DoNotOptimize(result.velocity.data());
  }
}

void bench_hessian_apply(benchmark::State& state) {
  const int points = static_cast<int>(state.range(0));
  const auto rho = grid::make_grid_density(-7.0, 7.0, points,
                                           [](double x) { return std::exp(-0.5 * x * x); });
  grid::Kl1d kl;
  kl.potential = [](double x) { return 0.5 * x * x; };
  kl.curvature = [](double) { return 1.0; };
  grid::GridFunction phi;
  phi.values = rho.x.array().sin().matrix();
  for (auto _ : state) {
    auto out = grid::hessian_apply(grid::Metric1d::Wasserstein, grid::Functional1d{kl}, rho, phi);
    benchmark::DoNotOptimize(out.data());
  }
}

void bench_transport_step(benchmark::State& state) {
  const int points = static_cast<int>(state.range(0));
  const auto rho = grid::make_grid_density(-6.0, 6.0, points,
                                           [](double x) { return std::exp(-0.5 * x * x); });
  grid::GridFunction phi;
  phi.values = 0.1 * rho.x;
  const double dt = 0.5 * rho.dx / 0.1;
  for (auto _ : state) {
    auto next = grid::w_transport_step(rho, phi, dt);
    benchmark::DoNotOptimize(next.values.data());
  }
}

}  // namespace

BENCHMARK(bench_newton_ode)->Arg(1001)->Arg(4001)->Arg(16001);
BENCHMARK(bench_hessian_apply)->Arg(201)->Arg(801);
BENCHMARK(bench_transport_step)->Arg(1001)->Arg(16001);
