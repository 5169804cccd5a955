#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wnewton/experiment.hpp"
#include "wnewton/grid1d.hpp"
#include "wnewton/metrics.hpp"
#include "wnewton/rng.hpp"
#include "wnewton/targets.hpp"

using namespace wnewton;
using namespace wnewton::harness;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("registry: build targets by name, reject unknown names") {
  for (const auto& name : registered_targets()) {
    const auto model = build_target(name);
    CHECK(model.dim >= 1);
  }
  CHECK_THROWS_AS(build_target("no-such-target"), InvalidConfig);
}

TEST_CASE("double-well at the origin is a non-convex stationary point") {
  const auto model = build_target("double-well");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  CHECK(model.gradient(x)[0] == doctest::Approx(0.0));
  CHECK(model.hessian(x)(0, 0) == doctest::Approx(-2.0));
}

TEST_CASE("gauss1d potential is x^2/2 by default") {
  const auto model = build_target("gauss1d");
  Eigen::VectorXd x(1);
  x << 1.0;
  CHECK(model.potential(x) == doctest::Approx(0.5));
}

TEST_CASE("every registered target passes derivative validation") {
  Rng rng(44, RngStream::Generic, 0, 0);
  for (const auto& name : registered_targets()) {
    const auto model = build_target(name);
    std::vector<Eigen::VectorXd> probes;
    for (int i = 0; i < 10; ++i) probes.push_back(0.8 * rng.normal_vector(model.dim));
    const auto diag = validate_model(model, probes);
    INFO("target ", name);
    CHECK(diag.max_gradient_error < 1e-5);
    CHECK(diag.max_hessian_error < 1e-5);
    CHECK(diag.max_hessian_asymmetry < 1e-12);
  }
}

TEST_CASE("blr posterior with zero features is the prior") {
  BlrDataset data;
  data.train_features = Eigen::MatrixXd::Zero(8, 3);
  data.train_labels = Eigen::VectorXi::Zero(8);
  data.test_features = Eigen::MatrixXd::Zero(2, 3);
  data.test_labels = Eigen::VectorXi::Zero(2);
  const double prior_scale = 0.5;
  BlrPosterior posterior(data, prior_scale);
  const auto model = posterior.model();

  Eigen::VectorXd w(3);
  w << 0.3, -0.1, 0.7;
  CHECK(model.gradient(w).isApprox(w / (prior_scale * prior_scale), 1e-12));
  CHECK(model.hessian(w).isApprox(
      Eigen::MatrixXd::Identity(3, 3) / (prior_scale * prior_scale), 1e-12));
}

TEST_CASE("full-batch stochastic gradient equals the exact gradient") {
  auto data = make_synthetic_blr(4, 60, 10, 5);
  data.batch_size = 60;  // nominally stochastic, but the batch is everything
  BlrPosterior posterior(data, 1.0);
  const auto model = posterior.model();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(4, 0.2);
  const Eigen::VectorXd full = model.gradient(w);
  posterior.resample_batch(123, 7);
  CHECK(model.gradient(w).isApprox(full, 1e-14));
}

TEST_CASE("mini-batches are deterministic in (seed, iteration)") {
  auto data = make_synthetic_blr(4, 100, 10, 6);
  data.batch_size = 25;
  BlrPosterior a(data, 1.0), b(data, 1.0);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(4, -0.1);
  a.resample_batch(9, 3);
  b.resample_batch(9, 3);
  CHECK(a.model().gradient(w).isApprox(b.model().gradient(w), 1e-15));
  b.resample_batch(9, 4);
  CHECK_FALSE(a.model().gradient(w).isApprox(b.model().gradient(w), 1e-10));
}

TEST_CASE("blr posterior derivative consistency") {
  auto data = make_synthetic_blr(5, 120, 10, 7);
  BlrPosterior posterior(data, 1.0);
  const auto model = posterior.model();
  Rng rng(2, RngStream::Generic, 0, 0);
  std::vector<Eigen::VectorXd> probes;
  for (int i = 0; i < 5; ++i) probes.push_back(0.5 * rng.normal_vector(5));
  const auto diag = validate_model(model, probes);
  CHECK(diag.max_gradient_error < 1e-5);
  CHECK(diag.max_hessian_error < 1e-5);
}

TEST_CASE("full-batch MAP matches a brute-force grid search") {
  // small separable-ish 2D problem
  auto data = make_synthetic_blr(2, 40, 10, 11);
  BlrPosterior posterior(data, 1.0);
  const auto model = posterior.model();

  // damped Newton iteration on the potential
  Eigen::VectorXd w = Eigen::VectorXd::Zero(2);
  for (int k = 0; k < 50; ++k)
    w -= model.hessian(w).ldlt().solve(model.gradient(w));

  // coarse-to-fine grid search
  Eigen::Vector2d best = Eigen::Vector2d::Zero();
  double best_value = std::numeric_limits<double>::infinity();
  const auto scan = [&](double lo0, double hi0, double lo1, double hi1, double step) {
    for (double a = lo0; a <= hi0 + 1e-12; a += step)
      for (double b = lo1; b <= hi1 + 1e-12; b += step) {
        Eigen::VectorXd candidate(2);
        candidate << a, b;
        const double value = model.potential(candidate);
        if (value < best_value) {
          best_value = value;
          best = candidate;
        }
      }
  };
  scan(-3.0, 3.0, -3.0, 3.0, 0.01);
  scan(best[0] - 0.02, best[0] + 0.02, best[1] - 0.02, best[1] + 0.02, 5e-4);
  CHECK((w - best).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("csv ingestion round trip for blr data") {
  const auto path = std::filesystem::temp_directory_path() / "wnewton_blr_test.csv";
  {
    std::ofstream out(path);
    out << "f0,f1,label\n";
    out << "0.5,1.0,1\n-0.5,0.2,0\n1.5,-1.0,1\n-1.5,0.4,0\n";
  }
  const auto data = read_blr_csv(path.string(), 0.5);
  CHECK(data.train_features.rows() == 2);
  CHECK(data.test_features.rows() == 2);
  CHECK(data.train_labels[0] == 1);
  CHECK(data.test_labels[1] == 0);
  std::filesystem::remove(path);

  {
    std::ofstream out(path);
    out << "f0,label\n0.5,2\n";
  }
  CHECK_THROWS_AS(read_blr_csv(path.string()), InvalidConfig);
  std::filesystem::remove(path);
}

TEST_CASE("energy distance: identical sets give zero, independent copies stay small") {
  Rng rng(3, RngStream::Generic, 0, 0);
  Eigen::MatrixXd a(400, 1), b(400, 1);
  for (int i = 0; i < 400; ++i) {
    a(i, 0) = rng.normal();
    b(i, 0) = rng.normal();
  }
  CHECK(energy_distance(a, a) == doctest::Approx(0.0).epsilon(1e-14));
  const double ed = energy_distance(a, b);
  CHECK(ed >= 0.0);
  CHECK(ed < 0.05);
}

TEST_CASE("energy distance of two separated unit Gaussians matches the closed form") {
  Rng rng(17, RngStream::Generic, 0, 0);
  const int n = 4000;
  Eigen::MatrixXd a(n, 1), b(n, 1);
  for (int i = 0; i < n; ++i) {
    a(i, 0) = rng.normal();
    b(i, 0) = 3.0 + rng.normal();
  }
  // E|x - y| for x ~ N(0,1), y ~ N(3,1): folded N(3, 2)
  const double s = std::sqrt(2.0);
  const double cross = s * std::sqrt(2.0 / M_PI) * std::exp(-9.0 / (2.0 * 2.0)) +
                       3.0 * std::erf(3.0 / (s * std::sqrt(2.0)));
  const double self = 2.0 / std::sqrt(M_PI);
  const double closed_form = 2.0 * cross - 2.0 * self;
  CHECK(energy_distance(a, b) == doctest::Approx(closed_form).epsilon(0.02));
}

TEST_CASE("energy distance caches the reference self term") {
  Rng rng(5, RngStream::Generic, 0, 0);
  Eigen::MatrixXd a(50, 2), b(200, 2);
  for (int i = 0; i < 50; ++i) a.row(i) = rng.normal_vector(2).transpose();
  for (int i = 0; i < 200; ++i) b.row(i) = rng.normal_vector(2).transpose();
  double cache = -1.0;
  const double first = energy_distance(a, b, &cache);
  CHECK(cache > 0.0);
  const double second = energy_distance(a, b, &cache);
  CHECK(first == doctest::Approx(second).epsilon(1e-15));
}

TEST_CASE("classifier metrics at w = 0 on a balanced test set") {
  BlrDataset data;
  data.train_features = Eigen::MatrixXd::Zero(2, 2);
  data.train_labels = Eigen::VectorXi::Zero(2);
  data.test_features = Eigen::MatrixXd::Random(10, 2);
  data.test_labels.resize(10);
  for (int i = 0; i < 10; ++i) data.test_labels[i] = i < 5 ? 1 : 0;
  const auto metrics = blr_test_metrics(Eigen::MatrixXd::Zero(1, 2), data);
  CHECK(metrics.accuracy == doctest::Approx(0.5));
  CHECK(metrics.log_likelihood == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("gaussian_fit_kl is near zero for a well-matched sample") {
  Rng rng(23, RngStream::Generic, 0, 0);
  Eigen::MatrixXd sample(20000, 2);
  for (int i = 0; i < 20000; ++i) sample.row(i) = rng.normal_vector(2).transpose();
  const double kl = gaussian_fit_kl(sample, Eigen::VectorXd::Zero(2),
                                    Eigen::MatrixXd::Identity(2, 2));
  CHECK(kl >= 0.0);
  CHECK(kl < 1e-3);
}

TEST_CASE("reference samples match target moments") {
  ParamMap params;
  const auto gauss = build_target("gauss1d", params);
  const auto sample = sample_reference("gauss1d", gauss, params, 20000, 3);
  CHECK(std::abs(sample.col(0).mean()) < 0.02);

  const auto dw = build_target("double-well", params);
  const auto dw_sample = sample_reference("double-well", dw, params, 20000, 3);
  // quadrature oracle for E[x^2] under exp(-(x^2-1)^2/2)
  const auto rho = grid::density_from_potential(-3.0, 3.0, 4001, dw);
  const double second_moment = (rho.values.array() * rho.x.array().square()).sum() * rho.dx;
  CHECK(std::abs(dw_sample.col(0).mean()) < 0.02);
  CHECK(dw_sample.col(0).array().square().mean() ==
        doctest::Approx(second_moment).epsilon(0.02));
}

TEST_CASE("config parsing with method options and overrides") {
  const std::vector<std::string> lines = {
      "# comment",
      "target = double-well",
      "methods = wgf, wnewton-k",
      "n = 50",
      "iterations = 10",
      "seed = 4",
      "wgf.alpha0 = 0.01",
      "wgf.score = kde",
      "wnewton-k.alpha0 = 1.0",
      "wnewton-k.lambda = 1e-3",
      "wnewton-k.solver = block-diagonal",
      "snapshots = 2,5",
  };
  auto cfg = parse_config_lines(lines);
  CHECK(cfg.target == "double-well");
  REQUIRE(cfg.methods.size() == 2);
  CHECK(cfg.methods[0].config.alpha0 == doctest::Approx(0.01));
  CHECK(cfg.methods[1].config.kernel_solver == samplers::KernelSolver::BlockDiagonal);
  CHECK(cfg.snapshot_iterations == std::vector<int>{2, 5});

  apply_override(cfg, "seed=9");
  CHECK(cfg.seed == 9);
  apply_override(cfg, "wgf.alpha0=0.02");
  CHECK(cfg.methods[0].config.alpha0 == doctest::Approx(0.02));
  CHECK_THROWS_AS(apply_override(cfg, "bogus_key=1"), InvalidConfig);
  CHECK_THROWS_AS(parse_config_lines({"methods = dance"}), InvalidConfig);
}

TEST_CASE("run_experiment: deterministic files, one row per cadence point") {
  const auto out_a = std::filesystem::temp_directory_path() / "wnewton_exp_a";
  const auto out_b = std::filesystem::temp_directory_path() / "wnewton_exp_b";
  std::filesystem::remove_all(out_a);
  std::filesystem::remove_all(out_b);

  ExperimentConfig cfg = parse_config_lines({
      "target = gauss1d",
      "methods = old, wgf",
      "n = 30",
      "iterations = 6",
      "seed = 12",
      "reference_samples = 500",
      "snapshots = 2,5",
      "old.alpha0 = 0.05",
      "wgf.alpha0 = 0.05",
  });
  cfg.out_dir = out_a.string();
  run_experiment(cfg);
  cfg.out_dir = out_b.string();
  run_experiment(cfg);

  const std::string metrics_a = slurp(out_a / "metrics.csv");
  CHECK(metrics_a == slurp(out_b / "metrics.csv"));
  CHECK(metrics_a.rfind("iteration,method,metric,value\n", 0) == 0);

  // 7 metric points (0..6) * 2 methods * 3 metrics + header
  int lines = 0;
  for (char c : metrics_a)
    if (c == '\n') ++lines;
  CHECK(lines == 1 + 7 * 2 * 3);

  CHECK(std::filesystem::exists(out_a / "snapshots" / "old" / "iter002.csv"));
  CHECK(std::filesystem::exists(out_a / "snapshots" / "wgf" / "iter005.csv"));
  CHECK(std::filesystem::exists(out_a / "summary.json"));

  std::filesystem::remove_all(out_a);
  std::filesystem::remove_all(out_b);
}

TEST_CASE("run_experiment with zero iterations emits only the initial metrics") {
  const auto out = std::filesystem::temp_directory_path() / "wnewton_exp_zero";
  std::filesystem::remove_all(out);
  ExperimentConfig cfg = parse_config_lines({
      "target = gauss1d",
      "methods = old",
      "n = 10",
      "iterations = 0",
      "seed = 2",
      "reference_samples = 200",
  });
  cfg.out_dir = out.string();
  run_experiment(cfg);
  const std::string metrics = slurp(out / "metrics.csv");
  int lines = 0;
  for (char c : metrics)
    if (c == '\n') ++lines;
  CHECK(lines == 1 + 3);  // header + three metrics at iteration 0
  std::filesystem::remove_all(out);
}

TEST_CASE("gaussian oracle trajectory tracks the closed form") {
  const auto rows = gaussian_oracle_trajectory(2.0, 0.25, 0.0, 1.0, 1.0, 1e-3);
  const auto& last = rows.back();
  CHECK(last.t == doctest::Approx(1.0));
  CHECK(std::abs(last.sim_var - last.nld_var) < 1e-4);
  CHECK(std::abs(last.sim_mean - last.nld_mean) < 1e-4);
}

TEST_SUITE_END();
