#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "wnewton/samplers.hpp"
#include "wnewton/targets.hpp"

namespace wnewton::harness {

struct MethodSpec {
  std::string name;  // CLI name, e.g. "wnewton-k"
  samplers::SamplerConfig config;
};

struct ExperimentConfig {
  std::string target = "gauss1d";
  ParamMap target_params;
  std::vector<MethodSpec> methods;
  int particle_count = 100;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int iterations = 20;
  int metric_cadence = 1;
  std::vector<int> snapshot_iterations = {2, 5, 10, 20};
  int reference_samples = 10000;
  double init_mean = 0.0;
  double init_var = 0.01;
  bool parallel = false;
  int blr_batch = 0;   // mini-batch size for the blr-synthetic target, 0 = full
  bool oracle = false; // gauss1d only: also emit closed-form trajectories
  double oracle_dt = 1e-3;
};

/// Flat key = value file; '#' starts a comment. Method-scoped keys use a
/// "<method>." prefix, target parameters a "target." prefix.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_lines(const std::vector<std::string>& lines);

/// Applies one "key=value" override on top of a parsed config.
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Step-size and schedule defaults per method (the benchmark-configuration
/// values; toy configs override them).
samplers::SamplerConfig default_method_config(samplers::Method method);

/// Deterministic reference sample from the target (exact for Gaussians,
/// rejection sampling for the toy densities). Returns an empty matrix for
/// targets without a direct sampler (blr-synthetic).
Eigen::MatrixXd sample_reference(const std::string& target_name, const TargetModel& model,
                                 const ParamMap& params, int count, std::uint64_t seed);

struct OracleRow {
  double t = 0.0;
  double sim_mean = 0.0, sim_var = 0.0;
  double nld_mean = 0.0, nld_var = 0.0;
  double old_lld_mean = 0.0, old_lld_var = 0.0;
  double hamcmc_mean = 0.0, hamcmc_var = 0.0;
};

/// Geodesic-step integration of the 1D Gaussian matrix flow next to the
/// closed forms, sampled at every step.
std::vector<OracleRow> gaussian_oracle_trajectory(double mean0, double var0, double mean_target,
                                                  double var_target, double t_max, double dt);

/// Runs every configured method against the target and writes metrics.csv,
/// snapshots/<method>/iterNNN.csv and summary.json under out_dir. Output is
/// byte-identical across reruns with the same config and seed.
void run_experiment(const ExperimentConfig& config);

}  // namespace wnewton::harness
