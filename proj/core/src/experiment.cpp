#include "wnewton/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wnewton/gaussian.hpp"
#include "wnewton/metrics.hpp"
#include "wnewton/rng.hpp"

namespace wnewton::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

samplers::HybridVariant hybrid_from_name(const std::string& name) {
  if (name == "stochastic") return samplers::HybridVariant::Stochastic;
  if (name == "deterministic") return samplers::HybridVariant::Deterministic;
  throw InvalidConfig("unknown hybrid variant: " + name);
}

samplers::ScoreSource score_from_name(const std::string& name) {
  if (name == "kde") return samplers::ScoreSource::Kde;
  if (name == "gaussian-fit") return samplers::ScoreSource::GaussianFit;
  if (name == "target-exact") return samplers::ScoreSource::TargetExact;
  throw InvalidConfig("unknown score source: " + name);
}

samplers::KernelSolver solver_from_name(const std::string& name) {
  if (name == "reduced") return samplers::KernelSolver::Reduced;
  if (name == "block-diagonal") return samplers::KernelSolver::BlockDiagonal;
  if (name == "sparse") return samplers::KernelSolver::SparseAnchors;
  if (name == "full") return samplers::KernelSolver::Full;
  throw InvalidConfig("unknown kernel solver: " + name);
}

void apply_method_key(samplers::SamplerConfig& cfg, const std::string& key,
                      const std::string& value) {
  if (key == "alpha0")
    cfg.alpha0 = std::stod(value);
  else if (key == "decay")
    cfg.schedule.decay = std::stod(value);
  else if (key == "decay_period")
    cfg.schedule.period = std::stoi(value);
  else if (key == "gamma")
    cfg.gamma = std::stod(value);
  else if (key == "epsilon")
    cfg.epsilon = std::stod(value);
  else if (key == "lambda")
    cfg.lambda = std::stod(value);
  else if (key == "hybrid")
    cfg.hybrid = hybrid_from_name(value);
  else if (key == "score")
    cfg.score_source = score_from_name(value);
  else if (key == "solver")
    cfg.kernel_solver = solver_from_name(value);
  else if (key == "anchors")
    cfg.anchor_count = std::stoi(value);
  else
    throw InvalidConfig("unknown method option: " + key);
}

struct MetricRow {
  int iteration;
  std::string method;
  std::string metric;
  double value;
};

struct MethodResult {
  std::string name;
  std::vector<MetricRow> rows;
  std::map<int, Eigen::MatrixXd> snapshots;
  std::string error;
  double wall_seconds = 0.0;
  Eigen::VectorXd final_mean;
  int completed_iterations = 0;
};

struct ReferenceInfo {
  Eigen::MatrixXd sample;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double energy_self = -1.0;
  bool available = false;
};

MethodResult run_single_method(const ExperimentConfig& exp, const MethodSpec& spec,
                               const TargetModel& shared_model, const BlrDataset* blr_data,
                               double prior_scale, const ReferenceInfo& ref) {
  const auto tic = std::chrono::steady_clock::now();
  MethodResult result;
  result.name = spec.name;

  // each method owns its batch state, so parallel and sequential runs match
  std::unique_ptr<BlrPosterior> blr;
  TargetModel model = shared_model;
  if (blr_data) {
    blr = std::make_unique<BlrPosterior>(*blr_data, prior_scale);
    model = blr->model();
  }

  samplers::SamplerConfig cfg = spec.config;
  cfg.max_iterations = exp.iterations;
  cfg.seed = exp.seed;

  ParticleEnsemble ensemble =
      init_ensemble(exp.particle_count, Eigen::VectorXd::Constant(model.dim, exp.init_mean),
                    exp.init_var * Eigen::MatrixXd::Identity(model.dim, model.dim), exp.seed);

  double energy_self = ref.energy_self;
  const auto record = [&](int iteration, const ParticleEnsemble& state) {
    if (blr) blr->resample_batch(exp.seed, iteration + 1);
    const bool due = iteration == 0 || iteration == exp.iterations ||
                     (exp.metric_cadence > 0 && iteration % exp.metric_cadence == 0);
    if (due) {
      if (ref.available) {
        result.rows.push_back({iteration, spec.name, "energy_distance",
                               energy_distance(state.positions, ref.sample, &energy_self)});
        const auto moments = moment_errors(state.positions, ref.mean, ref.cov);
        result.rows.push_back({iteration, spec.name, "mean_error", moments.mean_error});
        result.rows.push_back({iteration, spec.name, "cov_error", moments.cov_error});
      }
      if (blr_data) {
        const auto blr_metrics = blr_test_metrics(state.positions, *blr_data);
        result.rows.push_back({iteration, spec.name, "test_accuracy", blr_metrics.accuracy});
        result.rows.push_back(
            {iteration, spec.name, "test_log_likelihood", blr_metrics.log_likelihood});
      }
    }
    if (std::find(exp.snapshot_iterations.begin(), exp.snapshot_iterations.end(), iteration) !=
            exp.snapshot_iterations.end() ||
        iteration == 0)
      result.snapshots[iteration] = state.positions;
  };

  const auto traj = samplers::run(cfg, model, std::move(ensemble), record);
  if (traj.error) result.error = *traj.error;
  result.completed_iterations = traj.completed_iterations;
  result.final_mean = traj.final_state.positions.colwise().mean().transpose();
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
  return result;
}

}  // namespace

samplers::SamplerConfig default_method_config(samplers::Method method) {
  samplers::SamplerConfig cfg;
  cfg.method = method;
  switch (method) {
    case samplers::Method::Old:
      cfg.alpha0 = 1e-5;
      cfg.schedule = {0.9, 100};
      break;
    case samplers::Method::Svgd:
      cfg.alpha0 = 0.05;
      break;
    case samplers::Method::Wgf:
      cfg.alpha0 = 1e-5;
      cfg.schedule = {0.9, 100};
      break;
    case samplers::Method::Halld:
      cfg.alpha0 = 0.01;
      break;
    case samplers::Method::WNewtonAffine:
      cfg.alpha0 = 2e-3;
      cfg.schedule = {0.82, 100};
      break;
    case samplers::Method::WNewtonKernel:
      cfg.alpha0 = 2e-3;
      cfg.schedule = {0.9, 100};
      break;
  }
  return cfg;
}

ExperimentConfig parse_config_lines(const std::vector<std::string>& lines) {
  ExperimentConfig cfg;
  cfg.methods.clear();
  std::vector<std::pair<std::string, std::string>> method_keys;

  for (const auto& raw : lines) {
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidConfig("config line without '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "target")
      cfg.target = value;
    else if (key.rfind("target.", 0) == 0)
      cfg.target_params.values[key.substr(7)] = std::stod(value);
    else if (key == "methods") {
      for (const auto& name : split(value, ',')) {
        MethodSpec spec;
        spec.name = name;
        spec.config = default_method_config(samplers::method_from_name(name));
        cfg.methods.push_back(std::move(spec));
      }
    } else if (key == "n")
      cfg.particle_count = std::stoi(value);
    else if (key == "seed")
      cfg.seed = std::stoull(value);
    else if (key == "out")
      cfg.out_dir = value;
    else if (key == "iterations")
      cfg.iterations = std::stoi(value);
    else if (key == "metric_cadence")
      cfg.metric_cadence = std::stoi(value);
    else if (key == "snapshots") {
      cfg.snapshot_iterations.clear();
      for (const auto& item : split(value, ',')) cfg.snapshot_iterations.push_back(std::stoi(item));
    } else if (key == "reference_samples")
      cfg.reference_samples = std::stoi(value);
    else if (key == "init_mean")
      cfg.init_mean = std::stod(value);
    else if (key == "init_var")
      cfg.init_var = std::stod(value);
    else if (key == "parallel")
      cfg.parallel = std::stoi(value) != 0;
    else if (key == "blr_batch")
      cfg.blr_batch = std::stoi(value);
    else if (key == "oracle")
      cfg.oracle = std::stoi(value) != 0;
    else if (key == "oracle_dt")
      cfg.oracle_dt = std::stod(value);
    else {
      const auto dot = key.find('.');
      if (dot == std::string::npos) throw InvalidConfig("unknown config key: " + key);
      method_keys.emplace_back(key, value);
    }
  }

  for (const auto& [key, value] : method_keys) {
    const auto dot = key.find('.');
    const std::string method_name = key.substr(0, dot);
    const std::string option = key.substr(dot + 1);
    bool found = false;
    for (auto& spec : cfg.methods)
      if (spec.name == method_name) {
        apply_method_key(spec.config, option, value);
        found = true;
      }
    if (!found)
      throw InvalidConfig("method option for unlisted method: " + key);
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return parse_config_lines(lines);
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  // route through the same parser; method lists cannot be overridden this way
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw InvalidConfig("override without '=': " + assignment);
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  if (key == "methods") throw InvalidConfig("methods cannot be overridden, edit the config");

  const auto dot = key.find('.');
  if (dot != std::string::npos && key.rfind("target.", 0) != 0) {
    const std::string method_name = key.substr(0, dot);
    for (auto& spec : config.methods)
      if (spec.name == method_name) {
        apply_method_key(spec.config, key.substr(dot + 1), value);
        return;
      }
    throw InvalidConfig("override for unlisted method: " + key);
  }
  ExperimentConfig scratch = config;
  scratch = parse_config_lines({assignment});
  // copy the single recognized scalar back
  if (key == "target") config.target = scratch.target;
  else if (key.rfind("target.", 0) == 0) config.target_params.values[key.substr(7)] = std::stod(value);
  else if (key == "n") config.particle_count = scratch.particle_count;
  else if (key == "seed") config.seed = scratch.seed;
  else if (key == "out") config.out_dir = scratch.out_dir;
  else if (key == "iterations") config.iterations = scratch.iterations;
  else if (key == "metric_cadence") config.metric_cadence = scratch.metric_cadence;
  else if (key == "snapshots") config.snapshot_iterations = scratch.snapshot_iterations;
  else if (key == "reference_samples") config.reference_samples = scratch.reference_samples;
  else if (key == "init_mean") config.init_mean = scratch.init_mean;
  else if (key == "init_var") config.init_var = scratch.init_var;
  else if (key == "parallel") config.parallel = scratch.parallel;
  else if (key == "blr_batch") config.blr_batch = scratch.blr_batch;
  else if (key == "oracle") config.oracle = scratch.oracle;
  else if (key == "oracle_dt") config.oracle_dt = scratch.oracle_dt;
  else throw InvalidConfig("unknown override key: " + key);
}

Eigen::MatrixXd sample_reference(const std::string& target_name, const TargetModel& model,
                                 const ParamMap& params, int count, std::uint64_t seed) {
  Rng rng(seed, RngStream::Reference, 0, 0);
  if (target_name == "gauss1d" || target_name == "gaussNd") {
    const double mu = params.get("mu_star", 0.0);
    const double sd = std::sqrt(params.get("sigma_star", 1.0));
    Eigen::MatrixXd out(count, model.dim);
    for (int i = 0; i < count; ++i)
      for (int j = 0; j < model.dim; ++j) out(i, j) = mu + sd * rng.normal();
    return out;
  }
  if (target_name == "blr-synthetic") return {};

  Eigen::VectorXd lo, hi;
  if (target_name == "double-well") {
    lo = Eigen::VectorXd::Constant(1, -3.0);
    hi = Eigen::VectorXd::Constant(1, 3.0);
  } else if (target_name == "bimodal2d") {
    lo = Eigen::VectorXd::Constant(2, -6.0);
    hi = Eigen::VectorXd::Constant(2, 6.0);
  } else if (target_name == "double-banana") {
    lo.resize(2);
    hi.resize(2);
    lo << -3.5, -2.0;
    hi << 3.5, 4.5;
  } else {
    throw InvalidConfig("sample_reference: no sampler for target '" + target_name + "'");
  }

  // envelope from a coarse scan of the potential over the box
  const int d = model.dim;
  double f_min = std::numeric_limits<double>::infinity();
  const int scan = d == 1 ? 4096 : 256;
  Eigen::VectorXd probe(d);
  if (d == 1) {
    for (int i = 0; i < scan; ++i) {
      probe[0] = lo[0] + (hi[0] - lo[0]) * i / (scan - 1);
      f_min = std::min(f_min, model.potential(probe));
    }
  } else {
    for (int i = 0; i < scan; ++i)
      for (int j = 0; j < scan; ++j) {
        probe[0] = lo[0] + (hi[0] - lo[0]) * i / (scan - 1);
        probe[1] = lo[1] + (hi[1] - lo[1]) * j / (scan - 1);
        f_min = std::min(f_min, model.potential(probe));
      }
  }
  const double log_bound = -f_min + 0.5;  // margin for inter-node structure

  Eigen::MatrixXd out(count, d);
  int accepted = 0;
  std::int64_t draws = 0;
  constexpr std::int64_t kMaxDraws = 200000000;
  while (accepted < count) {
    if (++draws > kMaxDraws)
      throw Error("sample_reference: rejection sampler exceeded its draw budget");
    for (int j = 0; j < d; ++j) probe[j] = lo[j] + (hi[j] - lo[j]) * rng.uniform();
    const double log_density = -model.potential(probe);
    if (std::log(rng.uniform()) < log_density - log_bound) {
      out.row(accepted) = probe.transpose();
      ++accepted;
    }
  }
  return out;
}

std::vector<OracleRow> gaussian_oracle_trajectory(double mean0, double var0, double mean_target,
                                                  double var_target, double t_max, double dt) {
  using namespace wnewton::gaussian;
  GaussianState state;
  state.mean = Eigen::VectorXd::Constant(1, mean0);
  state.cov = Eigen::MatrixXd::Constant(1, 1, var0);
  const Eigen::MatrixXd target_cov = Eigen::MatrixXd::Constant(1, 1, var_target);
  const Eigen::VectorXd target_mean = Eigen::VectorXd::Constant(1, mean_target);

  std::vector<OracleRow> rows;
  const int steps = static_cast<int>(std::llround(t_max / dt));
  rows.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    OracleRow row;
    row.t = t;
    row.sim_mean = state.mean[0];
    row.sim_var = state.cov(0, 0);
    const auto nld = closed_form_1d(Dynamics1d::Nld, mean0, var0, mean_target, var_target, t);
    const auto lld = closed_form_1d(Dynamics1d::OldLld, mean0, var0, mean_target, var_target, t);
    const auto ham = closed_form_1d(Dynamics1d::Hamcmc, mean0, var0, mean_target, var_target, t);
    row.nld_mean = nld.mean;
    row.nld_var = nld.var;
    row.old_lld_mean = lld.mean;
    row.old_lld_var = lld.var;
    row.hamcmc_mean = ham.mean;
    row.hamcmc_var = ham.var;
    rows.push_back(row);
    if (k < steps) {
      const Eigen::MatrixXd direction = solve_newton_direction(state.cov, target_cov);
      state = step_newton_geodesic(state, direction, target_mean, dt);
    }
  }
  return rows;
}

void run_experiment(const ExperimentConfig& exp) {
  if (exp.methods.empty()) throw InvalidConfig("run_experiment: no methods configured");

  ParamMap params = exp.target_params;
  TargetModel model;
  std::unique_ptr<BlrPosterior> blr;
  const BlrDataset* blr_data = nullptr;
  if (exp.target == "blr-synthetic") {
    BlrDataset data = make_synthetic_blr(
        static_cast<int>(params.get("dim", 5.0)), static_cast<int>(params.get("n_train", 500.0)),
        static_cast<int>(params.get("n_test", 500.0)),
        static_cast<std::uint64_t>(params.get("data_seed", 814.0)));
    data.batch_size = exp.blr_batch;
    blr = std::make_unique<BlrPosterior>(std::move(data), params.get("prior_scale", 1.0));
    model = blr->model();
    blr_data = &blr->dataset();
  } else {
    model = build_target(exp.target, params);
  }

  ReferenceInfo ref;
  if (!blr) {
    ref.sample = sample_reference(exp.target, model, params, exp.reference_samples, exp.seed);
    if (ref.sample.rows() > 0) {
      ref.available = true;
      ref.mean = ref.sample.colwise().mean().transpose();
      const Eigen::MatrixXd centered = ref.sample.rowwise() - ref.mean.transpose();
      ref.cov = centered.transpose() * centered / static_cast<double>(ref.sample.rows());
      double self_term = -1.0;
      // prime the cache once so per-method metric loops reuse it
      energy_distance(ref.sample.topRows(std::min<Eigen::Index>(1, ref.sample.rows())),
                      ref.sample, &self_term);
      ref.energy_self = self_term;
    }
  }

  std::vector<MethodResult> results(exp.methods.size());
  const double prior_scale = params.get("prior_scale", 1.0);
  const auto work = [&](std::size_t idx) {
    return run_single_method(exp, exp.methods[idx], model, blr_data, prior_scale, ref);
  };
  if (exp.parallel) {
    std::vector<std::future<MethodResult>> futures;
    for (std::size_t i = 0; i < exp.methods.size(); ++i)
      futures.push_back(std::async(std::launch::async, work, i));
    for (std::size_t i = 0; i < exp.methods.size(); ++i) results[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < exp.methods.size(); ++i) results[i] = work(i);
  }

  fs::create_directories(exp.out_dir);
  std::ofstream metrics_out(fs::path(exp.out_dir) / "metrics.csv");
  metrics_out << "iteration,method,metric,value\n";
  for (const auto& result : results)
    for (const auto& row : result.rows)
      metrics_out << row.iteration << ',' << row.method << ',' << row.metric << ','
                  << format_value(row.value) << '\n';

  for (const auto& result : results) {
    const fs::path snap_dir = fs::path(exp.out_dir) / "snapshots" / result.name;
    fs::create_directories(snap_dir);
    for (const auto& [iteration, positions] : result.snapshots) {
      char name[32];
      std::snprintf(name, sizeof(name), "iter%03d.csv", iteration);
      std::ofstream snap(snap_dir / name);
      for (int j = 0; j < positions.cols(); ++j) snap << (j ? "," : "") << "x" << j;
      snap << '\n';
      for (Eigen::Index i = 0; i < positions.rows(); ++i) {
        for (Eigen::Index j = 0; j < positions.cols(); ++j)
          snap << (j ? "," : "") << format_value(positions(i, j));
        snap << '\n';
      }
    }
  }

  if (exp.oracle) {
    if (exp.target != "gauss1d")
      throw InvalidConfig("oracle mode requires the gauss1d target");
    const auto rows = gaussian_oracle_trajectory(
        exp.init_mean, exp.init_var, params.get("mu_star", 0.0), params.get("sigma_star", 1.0),
        exp.iterations * exp.oracle_dt, exp.oracle_dt);
    std::ofstream oracle_out(fs::path(exp.out_dir) / "oracle.csv");
    oracle_out << "t,sim_mean,sim_var,nld_mean,nld_var,old_lld_mean,old_lld_var,"
                  "hamcmc_mean,hamcmc_var\n";
    for (const auto& row : rows)
      oracle_out << format_value(row.t) << ',' << format_value(row.sim_mean) << ','
                 << format_value(row.sim_var) << ',' << format_value(row.nld_mean) << ','
                 << format_value(row.nld_var) << ',' << format_value(row.old_lld_mean) << ','
                 << format_value(row.old_lld_var) << ',' << format_value(row.hamcmc_mean) << ','
                 << format_value(row.hamcmc_var) << '\n';
  }

  json summary;
  summary["target"] = exp.target;
  summary["n"] = exp.particle_count;
  summary["seed"] = exp.seed;
  summary["iterations"] = exp.iterations;
  json per_method = json::object();
  for (const auto& result : results) {
    json entry;
    entry["completed_iterations"] = result.completed_iterations;
    entry["wall_seconds"] = result.wall_seconds;
    if (!result.error.empty()) entry["error"] = result.error;
    json final_metrics = json::object();
    for (const auto& row : result.rows)
      if (row.iteration == result.completed_iterations) final_metrics[row.metric] = row.value;
    entry["final"] = final_metrics;
    json mean = json::array();
    for (Eigen::Index j = 0; j < result.final_mean.size(); ++j)
      mean.push_back(result.final_mean[j]);
    entry["final_mean"] = mean;
    per_method[result.name] = entry;
  }
  summary["methods"] = per_method;
  std::ofstream summary_out(fs::path(exp.out_dir) / "summary.json");
  summary_out << summary.dump(2) << '\n';
}

}  // namespace wnewton::harness
