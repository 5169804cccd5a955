// Command line front end: run configured experiments, quick method
// comparisons, Gaussian-family oracle trajectories, 1D grid flows, and
// target-model validation.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "wnewton/experiment.hpp"
#include "wnewton/grid1d.hpp"
#include "wnewton/rng.hpp"

namespace {

using namespace wnewton;

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            std::uint64_t seed, bool has_seed, const std::string& out, bool parallel) {
  harness::ExperimentConfig cfg = harness::parse_config_file(config_path);
  for (const auto& item : overrides) harness::apply_override(cfg, item);
  if (has_seed) cfg.seed = seed;
  if (!out.empty()) cfg.out_dir = out;
  if (parallel) cfg.parallel = true;
  harness::run_experiment(cfg);
  std::cout << "wrote " << cfg.out_dir << "/metrics.csv\n";
  return 0;
}

int cmd_compare(const std::string& target, const std::string& methods, int n, int iterations,
                std::uint64_t seed, const std::string& out,
                const std::vector<std::string>& overrides) {
  std::vector<std::string> lines = {
      "target = " + target,
      "methods = " + methods,
      "n = " + std::to_string(n),
      "iterations = " + std::to_string(iterations),
      "seed = " + std::to_string(seed),
      "out = " + out,
  };
  harness::ExperimentConfig cfg = harness::parse_config_lines(lines);
  for (const auto& item : overrides) harness::apply_override(cfg, item);
  harness::run_experiment(cfg);
  std::cout << "wrote " << cfg.out_dir << "/metrics.csv\n";
  return 0;
}

int cmd_gaussian_oracle(double var0, double var_target, double t, double mean0,
                        double mean_target, double dt, const std::string& out) {
  const auto rows =
      harness::gaussian_oracle_trajectory(mean0, var0, mean_target, var_target, t, dt);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw Error("cannot open " + out);
    os = &file;
  }
  *os << "t,sim_mean,sim_var,nld_mean,nld_var,old_lld_mean,old_lld_var,hamcmc_mean,hamcmc_var\n";
  char line[400];
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  row.t, row.sim_mean, row.sim_var, row.nld_mean, row.nld_var, row.old_lld_mean,
                  row.old_lld_var, row.hamcmc_mean, row.hamcmc_var);
    *os << line;
  }
  const auto& last = rows.back();
  std::fprintf(stderr, "t=%g  nld: mean %.6g var %.6g  (sim: mean %.6g var %.6g)\n", last.t,
               last.nld_mean, last.nld_var, last.sim_mean, last.sim_var);
  return 0;
}

int cmd_grid(const std::string& target, int points, double lo, double hi, int steps, double dt,
             double init_shift, const std::string& out_dir) {
  const TargetModel model = harness::build_target(target);
  if (model.dim != 1) throw InvalidConfig("grid: target must be one-dimensional");
  const grid::GridDensity target_density = grid::density_from_potential(lo, hi, points, model);

  // start from the target translated by init_shift
  grid::GridDensity rho = grid::make_grid_density(lo, hi, points, [&](double x) {
    Eigen::VectorXd v(1);
    v[0] = x - init_shift;
    return std::exp(-model.potential(v));
  });

  std::filesystem::create_directories(out_dir);
  grid::write_csv(out_dir + "/density_initial.csv", rho);

  std::ofstream kl_out(out_dir + "/kl.csv");
  kl_out << "step,kl\n";
  char line[64];
  for (int k = 0; k <= steps; ++k) {
    std::snprintf(line, sizeof(line), "%d,%.12g\n", k, grid::kl_quadrature(rho, target_density));
    kl_out << line;
    if (k == steps) break;
    const auto direction = grid::solve_w_newton_direction_kl(rho, model);
    const double vmax = direction.velocity.cwiseAbs().maxCoeff();
    const double cfl_dt = std::min(dt, 0.9 * rho.dx / std::max(vmax, 1e-12));
    rho = grid::w_transport_step(rho, direction.phi, cfl_dt);
  }
  grid::write_csv(out_dir + "/density_final.csv", rho);
  std::cout << "wrote " << out_dir << "/density_final.csv and kl.csv\n";
  return 0;
}

int cmd_validate(const std::string& target, int probes, std::uint64_t seed, double spread) {
  const TargetModel model = harness::build_target(target);
  Rng rng(seed, RngStream::Generic, 0, 1);
  std::vector<Eigen::VectorXd> points;
  for (int i = 0; i < probes; ++i) points.push_back(spread * rng.normal_vector(model.dim));
  const ModelDiagnostics diag = validate_model(model, points);
  std::printf("target %s (d=%d), %d probes\n", target.c_str(), model.dim, probes);
  std::printf("  max gradient rel. error   %.3e\n", diag.max_gradient_error);
  std::printf("  max hessian rel. error    %.3e\n", diag.max_hessian_error);
  std::printf("  max hessian asymmetry     %.3e\n", diag.max_hessian_asymmetry);
  const bool ok = diag.max_gradient_error < 1e-5 && diag.max_hessian_error < 1e-5 &&
                  diag.max_hessian_asymmetry < 1e-12;
  std::printf("  %s\n", ok ? "OK" : "FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein Newton sampling toolkit"};
  app.require_subcommand(1);

  // run
  std::string config_path, run_out;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool parallel = false;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("--config", config_path, "key = value config file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the seed");
  run->add_option("--out", run_out, "override the output directory");
  run->add_option("--set", overrides, "extra key=value overrides");
  run->add_flag("--parallel", parallel, "run methods concurrently");

  // compare
  std::string target = "gauss1d", methods = "wgf,wnewton-a";
  int n = 100, iterations = 20;
  std::uint64_t cmp_seed = 0;
  std::string cmp_out = "out";
  std::vector<std::string> cmp_overrides;
  auto* compare = app.add_subcommand("compare", "Quick multi-method comparison");
  compare->add_option("--target", target, "registered target name")->required();
  compare->add_option("--methods", methods, "comma-separated method list")->required();
  compare->add_option("--n", n, "particle count");
  compare->add_option("--iters", iterations, "iteration count");
  compare->add_option("--seed", cmp_seed, "seed");
  compare->add_option("--out", cmp_out, "output directory");
  compare->add_option("--set", cmp_overrides, "extra key=value overrides");

  // gaussian-oracle
  double var0 = 0.25, var_target = 1.0, t_max = 2.0, mean0 = 2.0, mean_target = 0.0, dt = 1e-3;
  std::string oracle_out;
  auto* oracle = app.add_subcommand("gaussian-oracle",
                                    "1D Gaussian-family trajectories, simulated and closed form");
  oracle->add_option("--sigma0", var0, "initial variance")->required();
  oracle->add_option("--sigmastar", var_target, "target variance")->required();
  oracle->add_option("--t", t_max, "final time")->required();
  oracle->add_option("--mu0", mean0, "initial mean");
  oracle->add_option("--mustar", mean_target, "target mean");
  oracle->add_option("--dt", dt, "geodesic step size");
  oracle->add_option("--out", oracle_out, "CSV path (stdout when omitted)");

  // grid
  std::string grid_target = "gauss1d", grid_out = "out-grid";
  int grid_points = 2001, grid_steps = 50;
  double grid_lo = -8.0, grid_hi = 8.0, grid_dt = 0.05, grid_shift = 1.0;
  auto* grid_cmd = app.add_subcommand("grid", "1D grid-density Newton flow");
  grid_cmd->add_option("--target", grid_target, "1D target name")->required();
  grid_cmd->add_option("--points", grid_points, "grid points")->required();
  grid_cmd->add_option("--lo", grid_lo, "left end");
  grid_cmd->add_option("--hi", grid_hi, "right end");
  grid_cmd->add_option("--steps", grid_steps, "transport steps");
  grid_cmd->add_option("--dt", grid_dt, "time step (CFL-capped)");
  grid_cmd->add_option("--shift", grid_shift, "initial translation of the target density");
  grid_cmd->add_option("--out", grid_out, "output directory");

  // validate
  std::string val_target = "gauss1d";
  int val_probes = 10;
  std::uint64_t val_seed = 0;
  double val_spread = 1.0;
  auto* validate = app.add_subcommand("validate", "Check analytic derivatives of a target");
  validate->add_option("--target", val_target, "registered target name")->required();
  validate->add_option("--probes", val_probes, "number of random probes");
  validate->add_option("--seed", val_seed, "probe seed");
  validate->add_option("--spread", val_spread, "probe standard deviation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, overrides, seed, seed_opt->count() > 0, run_out, parallel);
    if (compare->parsed())
      return cmd_compare(target, methods, n, iterations, cmp_seed, cmp_out, cmp_overrides);
    if (oracle->parsed())
      return cmd_gaussian_oracle(var0, var_target, t_max, mean0, mean_target, dt, oracle_out);
    if (grid_cmd->parsed())
      return cmd_grid(grid_target, grid_points, grid_lo, grid_hi, grid_steps, grid_dt, grid_shift,
                      grid_out);
    if (validate->parsed()) return cmd_validate(val_target, val_probes, val_seed, val_spread);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
