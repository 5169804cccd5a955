#include "wnewton/targets.hpp"

#include <cmath>
#include <functional>

#include "wnewton/blr.hpp"

namespace wnewton::harness {

namespace {

TargetModel make_gauss1d(const ParamMap& params) {
  const double mu = params.get("mu_star", 0.0);
  const double var = params.get("sigma_star", 1.0);
  if (!(var > 0.0)) throw InvalidConfig("gauss1d: sigma_star must be positive");
  TargetModel model;
  model.dim = 1;
  model.potential = [mu, var](const Eigen::VectorXd& x) {
    return (x[0] - mu) * (x[0] - mu) / (2.0 * var);
  };
  model.gradient = [mu, var](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(1);
    g[0] = (x[0] - mu) / var;
    return g;
  };
  model.hessian = [var](const Eigen::VectorXd&) {
    Eigen::MatrixXd h(1, 1);
    h(0, 0) = 1.0 / var;
    return h;
  };
  model.exact_score = [mu, var](const Eigen::VectorXd& x) {
    Eigen::VectorXd s(1);
    s[0] = -(x[0] - mu) / var;
    return s;
  };
  return model;
}

TargetModel make_gauss_nd(const ParamMap& params) {
  const int d = static_cast<int>(params.get("dim", 2.0));
  const double mu = params.get("mu_star", 0.0);
  const double var = params.get("sigma_star", 1.0);
  if (d < 1) throw InvalidConfig("gaussNd: dim must be >= 1");
  if (!(var > 0.0)) throw InvalidConfig("gaussNd: sigma_star must be positive");
  TargetModel model;
  model.dim = d;
  model.potential = [mu, var](const Eigen::VectorXd& x) {
    return (x.array() - mu).square().sum() / (2.0 * var);
  };
  model.gradient = [mu, var](const Eigen::VectorXd& x) {
    return ((x.array() - mu) / var).matrix().eval();
  };
  model.hessian = [d, var](const Eigen::VectorXd&) {
    return (Eigen::MatrixXd::Identity(d, d) / var).eval();
  };
  model.exact_score = [mu, var](const Eigen::VectorXd& x) {
    return (-(x.array() - mu) / var).matrix().eval();
  };
  return model;
}

TargetModel make_double_well(const ParamMap&) {
  TargetModel model;
  model.dim = 1;
  model.potential = [](const Eigen::VectorXd& x) {
    const double t = x[0] * x[0] - 1.0;
    return 0.5 * t * t;
  };
  model.gradient = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(1);
    g[0] = 2.0 * x[0] * x[0] * x[0] - 2.0 * x[0];
    return g;
  };
  model.hessian = [](const Eigen::VectorXd& x) {
    Eigen::MatrixXd h(1, 1);
    h(0, 0) = 6.0 * x[0] * x[0] - 2.0;
    return h;
  };
  return model;
}

double log_cosh(double t) {
  // stable for large |t|
  const double a = std::abs(t);
  return a + std::log1p(std::exp(-2.0 * a)) - M_LN2;
}

constexpr double kTiny = 1e-12;

// ring of radius 3 with bumps at x1 = +/-3:
// f(x) = 2(|x| - 3)^2 + 2 x1^2 - log cosh(12 x1), constants dropped
TargetModel make_bimodal2d(const ParamMap&) {
  TargetModel model;
  model.dim = 2;
  model.potential = [](const Eigen::VectorXd& x) {
    const double r = std::max(x.norm(), kTiny);
    return 2.0 * (r - 3.0) * (r - 3.0) + 2.0 * x[0] * x[0] - log_cosh(12.0 * x[0]);
  };
  model.gradient = [](const Eigen::VectorXd& x) {
    const double r = std::max(x.norm(), kTiny);
    Eigen::VectorXd g = 4.0 * (r - 3.0) / r * x;
    g[0] += 4.0 * x[0] - 12.0 * std::tanh(12.0 * x[0]);
    return g;
  };
  model.hessian = [](const Eigen::VectorXd& x) {
    const double r = std::max(x.norm(), kTiny);
    const Eigen::MatrixXd outer = x * x.transpose() / (r * r * r);
    Eigen::MatrixXd h =
        4.0 * ((1.0 - 3.0 / r) * Eigen::MatrixXd::Identity(2, 2) + 3.0 * outer);
    const double sech = 1.0 / std::cosh(12.0 * x[0]);
    h(0, 0) += 4.0 - 144.0 * sech * sech;
    return h;
  };
  return model;
}

// posterior of observing y = log(30) through F(x) = log((1-x1)^2 + 100 (x2-x1^2)^2)
// with noise sigma and a standard normal prior
TargetModel make_double_banana(const ParamMap& params) {
  const double y = params.get("y", std::log(30.0));
  const double sigma = params.get("sigma", 0.3);
  TargetModel model;
  model.dim = 2;
  const auto parts = [](const Eigen::VectorXd& x) {
    const double r = (1.0 - x[0]) * (1.0 - x[0]) + 100.0 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]);
    Eigen::VectorXd grad_r(2);
    grad_r[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
    grad_r[1] = 200.0 * (x[1] - x[0] * x[0]);
    Eigen::MatrixXd hess_r(2, 2);
    hess_r(0, 0) = 2.0 - 400.0 * x[1] + 1200.0 * x[0] * x[0];
    hess_r(0, 1) = hess_r(1, 0) = -400.0 * x[0];
    hess_r(1, 1) = 200.0;
    return std::make_tuple(r, grad_r, hess_r);
  };
  model.potential = [parts, y, sigma](const Eigen::VectorXd& x) {
    const auto [r, gr, hr] = parts(x);
    const double miss = y - std::log(r);
    return 0.5 * x.squaredNorm() + miss * miss / (2.0 * sigma * sigma);
  };
  model.gradient = [parts, y, sigma](const Eigen::VectorXd& x) {
    const auto [r, gr, hr] = parts(x);
    const double forward = std::log(r);
    const Eigen::VectorXd grad_f = gr / r;
    return (x + (forward - y) / (sigma * sigma) * grad_f).eval();
  };
  model.hessian = [parts, y, sigma](const Eigen::VectorXd& x) {
    const auto [r, gr, hr] = parts(x);
    const double forward = std::log(r);
    const Eigen::VectorXd grad_f = gr / r;
    const Eigen::MatrixXd hess_f = hr / r - gr * gr.transpose() / (r * r);
    return (Eigen::MatrixXd::Identity(2, 2) +
            grad_f * grad_f.transpose() / (sigma * sigma) +
            (forward - y) / (sigma * sigma) * hess_f)
        .eval();
  };
  return model;
}

TargetModel make_blr_synthetic(const ParamMap& params) {
  const int dim = static_cast<int>(params.get("dim", 5.0));
  const int train_count = static_cast<int>(params.get("n_train", 500.0));
  const int test_count = static_cast<int>(params.get("n_test", 500.0));
  const auto data_seed = static_cast<std::uint64_t>(params.get("data_seed", 814.0));
  const double prior_scale = params.get("prior_scale", 1.0);
  BlrDataset data = make_synthetic_blr(dim, train_count, test_count, data_seed);
  BlrPosterior posterior(std::move(data), prior_scale);
  posterior.use_full_batch();
  return posterior.model();
}

using Factory = std::function<TargetModel(const ParamMap&)>;

const std::map<std::string, Factory>& registry() {
  static const std::map<std::string, Factory> reg = {
      {"gauss1d", make_gauss1d},
      {"gaussNd", make_gauss_nd},
      {"double-well", make_double_well},
      {"bimodal2d", make_bimodal2d},
      {"double-banana", make_double_banana},
      {"blr-synthetic", make_blr_synthetic},
  };
  return reg;
}

}  // namespace

TargetModel build_target(const std::string& name, const ParamMap& params) {
  const auto& reg = registry();
  auto it = reg.find(name);
  if (it == reg.end()) throw InvalidConfig("build_target: unknown target '" + name + "'");
  return it->second(params);
}

std::vector<std::string> registered_targets() {
  std::vector<std::string> names;
  for (const auto& [name, factory] : registry()) names.push_back(name);
  return names;
}

}  // namespace wnewton::harness
