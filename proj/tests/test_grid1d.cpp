#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "wnewton/grid1d.hpp"
#include "wnewton/rng.hpp"
#include "wnewton/targets.hpp"

using namespace wnewton;
using namespace wnewton::grid;

namespace {

GridDensity gaussian_density(double lo, double hi, int points, double mean, double var) {
  return make_grid_density(lo, hi, points, [mean, var](double x) {
    return std::exp(-(x - mean) * (x - mean) / (2.0 * var));
  });
}

Kl1d quadratic_kl(double var_target) {
  Kl1d f;
  f.potential = [var_target](double x) { return x * x / (2.0 * var_target); };
  f.curvature = [var_target](double) { return 1.0 / var_target; };
  return f;
}

Interaction1d gaussian_interaction() {
  Interaction1d w;
  w.kernel = [](double x, double y) { return std::exp(-0.5 * (x - y) * (x - y)); };
  w.kernel_xx = [](double x, double y) {
    const double t = x - y;
    return (t * t - 1.0) * std::exp(-0.5 * t * t);
  };
  w.kernel_xy = [](double x, double y) {
    const double t = x - y;
    return (1.0 - t * t) * std::exp(-0.5 * t * t);
  };
  return w;
}

double inner(const GridDensity& rho, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return trapezoid(rho, a.cwiseProduct(b));
}

Eigen::VectorXd random_grid_vector(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

double functional_value(const Functional1d& functional, const GridDensity& rho) {
  const int n = rho.size();
  if (const auto* kl = std::get_if<Kl1d>(&functional)) {
    Eigen::VectorXd integrand(n);
    for (int j = 0; j < n; ++j) {
      const double p = std::max(rho.values[j], kDensityFloor);
      integrand[j] = rho.values[j] * (std::log(p) + kl->potential(rho.x[j]));
    }
    return trapezoid(rho, integrand);
  }
  if (const auto* inter = std::get_if<Interaction1d>(&functional)) {
    GridFunction conv = first_variation(functional, rho);
    (void)inter;
    return 0.5 * trapezoid(rho, conv.values.cwiseProduct(rho.values));
  }
  const auto& rkl = std::get<ReverseKl1d>(functional);
  Eigen::VectorXd integrand(n);
  for (int j = 0; j < n; ++j)
    integrand[j] = -rkl.target.values[j] * std::log(std::max(rho.values[j], kDensityFloor));
  return trapezoid(rho, integrand);
}

}  // namespace

TEST_SUITE_BEGIN("grid1d");

TEST_CASE("grid density is normalized and mass-1 in the rectangle sense") {
  const auto rho = gaussian_density(-8.0, 8.0, 801, 0.0, 1.0);
  CHECK(std::abs(rho.mass() - 1.0) < 1e-12);
  CHECK(rho.values.minCoeff() >= 0.0);
}

TEST_CASE("first variation of KL at the target is constant") {
  const auto model = harness::build_target("gauss1d");
  const auto rho = density_from_potential(-8.0, 8.0, 801, model);
  Kl1d f = quadratic_kl(1.0);
  const auto variation = first_variation(Functional1d{f}, rho);
  CHECK(variation.values.maxCoeff() - variation.values.minCoeff() < 1e-10);
}

TEST_CASE("first variation of a zero interaction kernel vanishes") {
  const auto rho = gaussian_density(-5.0, 5.0, 201, 0.0, 1.0);
  Interaction1d w;
  w.kernel = [](double, double) { return 0.0; };
  w.kernel_xx = [](double, double) { return 0.0; };
  w.kernel_xy = [](double, double) { return 0.0; };
  const auto variation = first_variation(Functional1d{w}, rho);
  CHECK(variation.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("first variation of reverse KL at the target is -1") {
  const auto rho = gaussian_density(-6.0, 6.0, 301, 0.0, 1.0);
  ReverseKl1d rkl{rho};
  const auto variation = first_variation(Functional1d{rkl}, rho);
  for (int j = 0; j < rho.size(); ++j)
    CHECK(variation.values[j] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("fisher-rao gradient: constants vanish and the output is tangent") {
  const auto rho = gaussian_density(-6.0, 6.0, 401, 0.5, 0.8);
  GridFunction constant;
  constant.values = Eigen::VectorXd::Constant(rho.size(), 4.2);
  CHECK(fr_gradient(rho, constant).cwiseAbs().maxCoeff() < 1e-14);

  Rng rng(2, RngStream::Generic, 0, 0);
  GridFunction bump;
  bump.values = random_grid_vector(rho.size(), rng);
  const Eigen::VectorXd grad = fr_gradient(rho, bump);
  CHECK(std::abs(trapezoid(rho, grad)) < 1e-12);
}

TEST_CASE("fisher-rao gradient of KL vanishes at the target") {
  const auto model = harness::build_target("gauss1d");
  const auto rho = density_from_potential(-8.0, 8.0, 801, model);
  const auto variation = first_variation(Functional1d{quadratic_kl(1.0)}, rho);
  CHECK(fr_gradient(rho, variation).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("wasserstein gradient: constants vanish, output sums to zero") {
  const auto rho = gaussian_density(-6.0, 6.0, 401, 0.0, 1.0);
  GridFunction constant;
  constant.values = Eigen::VectorXd::Constant(rho.size(), -3.0);
  CHECK(w_gradient(rho, constant).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(3, RngStream::Generic, 0, 0);
  GridFunction rough;
  rough.values = random_grid_vector(rho.size(), rng);
  const Eigen::VectorXd grad = w_gradient(rho, rough);
  CHECK(std::abs(grad.sum() * rho.dx) < 1e-12 * grad.cwiseAbs().maxCoeff());
}

TEST_CASE("wasserstein gradient of KL vanishes at the target") {
  const auto model = harness::build_target("gauss1d");
  const auto rho = density_from_potential(-8.0, 8.0, 801, model);
  const auto variation = first_variation(Functional1d{quadratic_kl(1.0)}, rho);
  CHECK(w_gradient(rho, variation).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("wasserstein gradient converges at second order on a known flux") {
  // rho Gaussian, dE = x^2/2: -(rho x)' = rho (x^2 - 1) for the unit Gaussian
  const auto error_at = [](int points) {
    const auto rho = gaussian_density(-8.0, 8.0, points, 0.0, 1.0);
    GridFunction quad;
    quad.values = 0.5 * rho.x.array().square().matrix();
    const Eigen::VectorXd grad = w_gradient(rho, quad);
    double err = 0.0;
    for (int j = 1; j + 1 < rho.size(); ++j) {
      const double exact = rho.values[j] * (rho.x[j] * rho.x[j] - 1.0);
      err = std::max(err, std::abs(grad[j] - exact));
    }
    return err;
  };
  const double coarse = error_at(401);
  const double fine = error_at(801);
  CHECK(coarse / fine > 3.0);  // second order halving gives ~4
}

TEST_CASE("hessian_apply: constants are annihilated for every combination") {
  const auto rho = gaussian_density(-7.0, 7.0, 301, 0.3, 1.2);
  const auto target = gaussian_density(-7.0, 7.0, 301, 0.0, 1.0);
  GridFunction constant;
  constant.values = Eigen::VectorXd::Constant(rho.size(), 2.5);

  const std::vector<Functional1d> functionals = {
      Functional1d{quadratic_kl(1.0)}, Functional1d{gaussian_interaction()},
      Functional1d{ReverseKl1d{target}}};
  for (const auto& functional : functionals) {
    for (auto metric : {Metric1d::FisherRao, Metric1d::Wasserstein}) {
      const Eigen::VectorXd out = hessian_apply(metric, functional, rho, constant);
      CHECK(out.cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("hessian_apply: every combination is self-adjoint in the trapezoid inner product") {
  const auto rho = gaussian_density(-7.0, 7.0, 181, 0.3, 1.2);
  const auto target = gaussian_density(-7.0, 7.0, 181, -0.2, 0.7);
  const std::vector<Functional1d> functionals = {
      Functional1d{quadratic_kl(0.8)}, Functional1d{gaussian_interaction()},
      Functional1d{ReverseKl1d{target}}};

  Rng rng(7, RngStream::Generic, 0, 0);
  for (const auto& functional : functionals) {
    for (auto metric : {Metric1d::FisherRao, Metric1d::Wasserstein}) {
      for (int trial = 0; trial < 100; ++trial) {
        GridFunction phi, psi;
        phi.values = random_grid_vector(rho.size(), rng);
        psi.values = random_grid_vector(rho.size(), rng);
        const double a = inner(rho, psi.values, hessian_apply(metric, functional, rho, phi));
        const double b = inner(rho, phi.values, hessian_apply(metric, functional, rho, psi));
        CHECK(std::abs(a - b) <= 1e-8 * std::max({1.0, std::abs(a), std::abs(b)}));
      }
    }
  }
}

TEST_CASE("fr + reverse KL at rho = rho* reduces to centered multiplication") {
  const auto rho = gaussian_density(-6.0, 6.0, 241, 0.0, 1.0);
  Rng rng(9, RngStream::Generic, 0, 0);
  GridFunction phi;
  phi.values = random_grid_vector(rho.size(), rng);
  const Eigen::VectorXd out =
      hessian_apply(Metric1d::FisherRao, Functional1d{ReverseKl1d{rho}}, rho, phi);
  const double mean = trapezoid(rho, phi.values.cwiseProduct(rho.values));
  const Eigen::VectorXd expect =
      rho.values.cwiseProduct((phi.values.array() - mean).matrix());
  CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("wasserstein KL hessian quadratic form on the Gaussian example") {
  // rho ~ N(0, 0.5), f = x^2/(2*2), phi = x^2/2: <phi, H phi> = 1 + 0.5/2
  const auto rho = gaussian_density(-8.0, 8.0, 2001, 0.0, 0.5);
  GridFunction phi;
  phi.values = 0.5 * rho.x.array().square().matrix();
  const Eigen::VectorXd out =
      hessian_apply(Metric1d::Wasserstein, Functional1d{quadratic_kl(2.0)}, rho, phi);
  CHECK(inner(rho, phi.values, out) == doctest::Approx(1.25).epsilon(1e-4));
}

TEST_CASE("wasserstein KL hessian is positive for convex potentials") {
  const auto rho = gaussian_density(-7.0, 7.0, 151, 0.4, 0.9);
  Rng rng(11, RngStream::Generic, 0, 0);
  for (int trial = 0; trial < 50; ++trial) {
    GridFunction phi;
    phi.values = random_grid_vector(rho.size(), rng);
    const Eigen::VectorXd out =
        hessian_apply(Metric1d::Wasserstein, Functional1d{quadratic_kl(1.5)}, rho, phi);
    CHECK(inner(rho, phi.values, out) >= -1e-10);
  }
}

TEST_CASE("first variations pass the Richardson directional-derivative check") {
  const auto rho = gaussian_density(-7.0, 7.0, 401, 0.2, 1.1);
  const auto target = gaussian_density(-7.0, 7.0, 401, 0.0, 0.8);
  Rng rng(13, RngStream::Generic, 0, 0);

  // smooth zero-trapezoid-sum perturbation that dies off at the ends
  Eigen::VectorXd sigma(rho.size());
  for (int j = 0; j < rho.size(); ++j)
    sigma[j] = std::sin(rho.x[j]) * std::exp(-0.25 * rho.x[j] * rho.x[j]);
  GridFunction ones;
  ones.values = Eigen::VectorXd::Ones(rho.size());
  sigma.array() -= trapezoid(rho, sigma) / trapezoid(rho, ones.values);

  const std::vector<Functional1d> functionals = {
      Functional1d{quadratic_kl(1.0)}, Functional1d{gaussian_interaction()},
      Functional1d{ReverseKl1d{target}}};
  for (const auto& functional : functionals) {
    const auto variation = first_variation(functional, rho);
    const double pairing = trapezoid(rho, sigma.cwiseProduct(variation.values));

    const auto value_at = [&](double s) {
      GridDensity perturbed = rho;
      perturbed.values += s * sigma;
      return functional_value(functional, perturbed);
    };
    const double s = 1e-3;
    const double d1 = (value_at(s) - value_at(-s)) / (2.0 * s);
    const double d2 = (value_at(0.5 * s) - value_at(-0.5 * s)) / s;
    const double richardson = (4.0 * d2 - d1) / 3.0;
    CHECK(std::abs(richardson - pairing) < 1e-6 * std::max(1.0, std::abs(pairing)));
  }
}

TEST_CASE("newton direction ODE: stationary density gives a zero field") {
  const auto model = harness::build_target("gauss1d");
  const auto rho = density_from_potential(-8.0, 8.0, 1601, model);
  const auto result = solve_w_newton_direction_kl(rho, model);
  CHECK(result.velocity.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("newton direction ODE reproduces the affine Gaussian direction") {
  const auto model = harness::build_target("gauss1d");
  SUBCASE("contracting start") {
    const auto rho = gaussian_density(-6.0, 10.0, 1601, 2.0, 0.25);
    const auto result = solve_w_newton_direction_kl(rho, model);
    double err = 0.0;
    for (int j = result.window_begin; j <= result.window_end; ++j)
      err = std::max(err, std::abs(result.velocity[j] - (0.6 * rho.x[j] - 3.2)));
    CHECK(err < 1e-3);
    CHECK(result.residual < 1e-8);
  }
  SUBCASE("expanding start") {
    const auto rho = gaussian_density(-10.0, 10.0, 2001, 0.0, 2.0);
    const auto result = solve_w_newton_direction_kl(rho, model);
    double err = 0.0;
    for (int j = result.window_begin; j <= result.window_end; ++j)
      err = std::max(err, std::abs(result.velocity[j] - (-rho.x[j] / 3.0)));
    CHECK(err < 1e-3);
  }
}

TEST_CASE("newton direction ODE needs a wide enough support window") {
  const auto model = harness::build_target("gauss1d");
  const auto rho = make_grid_density(-8.0, 8.0, 101, [](double x) {
    return std::exp(-x * x / (2.0 * 1e-6));
  });
  CHECK_THROWS_AS(solve_w_newton_direction_kl(rho, model), InsufficientSupport);
}

TEST_CASE("fisher-rao newton step: the target is a fixed point") {
  const auto model = harness::build_target("gauss1d");
  const auto rho = density_from_potential(-8.0, 8.0, 401, model);
  const auto next = fr_newton_step(rho, model, 0.1, 1e-8);
  CHECK((next.values - rho.values).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(std::abs(next.mass() - 1.0) < 1e-12);
}

TEST_CASE("fisher-rao newton descends KL from a perturbed start") {
  const auto model = harness::build_target("gauss1d");
  const auto target = density_from_potential(-8.0, 8.0, 401, model);
  auto rho = make_grid_density(-8.0, 8.0, 401, [](double x) {
    return std::exp(-(x - 0.8) * (x - 0.8) / 1.6) * (1.0 + 0.2 * std::sin(1.5 * x));
  });
  double kl = kl_quadrature(rho, target);
  for (int k = 0; k < 50; ++k) {
    rho = fr_newton_step(rho, model, 0.1, 1e-8);
    const double next_kl = kl_quadrature(rho, target);
    CHECK(next_kl <= kl + 1e-12);
    kl = next_kl;
  }
  CHECK(kl < 1e-3);
}

TEST_CASE("transport step: constant potential moves nothing") {
  const auto rho = gaussian_density(-5.0, 5.0, 201, 0.0, 1.0);
  GridFunction constant;
  constant.values = Eigen::VectorXd::Constant(rho.size(), 1.0);
  const auto next = w_transport_step(rho, constant, 0.01);
  CHECK((next.values - rho.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transport step: unit velocity translates the profile at first order") {
  const auto run_error = [](int points) {
    const auto rho = gaussian_density(-6.0, 6.0, points, 0.0, 0.5);
    GridFunction linear;
    linear.values = rho.x;
    GridDensity current = rho;
    const double t_final = 0.25;
    const double dt = 0.5 * current.dx;  // CFL number 1/2
    int steps = static_cast<int>(std::round(t_final / dt));
    for (int k = 0; k < steps; ++k) current = w_transport_step(current, linear, dt);
    const auto exact = gaussian_density(-6.0, 6.0, points, t_final, 0.5);
    return (current.values - exact.values).cwiseAbs().maxCoeff();
  };
  const double coarse = run_error(301);
  const double fine = run_error(601);
  CHECK(coarse / fine > 1.6);  // first-order upwind halves the error with the grid
}

TEST_CASE("transport step: CFL violation raises StepTooLarge") {
  const auto rho = gaussian_density(-5.0, 5.0, 201, 0.0, 1.0);
  GridFunction linear;
  linear.values = 10.0 * rho.x;
  CHECK_THROWS_AS(w_transport_step(rho, linear, 1.0), StepTooLarge);
}

TEST_CASE("transport step conserves mass and nonnegativity") {
  const auto rho = gaussian_density(-5.0, 5.0, 401, 0.5, 0.3);
  GridFunction wiggle;
  wiggle.values = (0.3 * rho.x.array().sin()).matrix();
  const auto next = w_transport_step(rho, wiggle, 0.5 * rho.dx);
  CHECK(std::abs(next.mass() - rho.mass()) < 1e-14);
  CHECK(next.values.minCoeff() >= 0.0);
}

TEST_CASE("newton transport flow decreases quadrature KL") {
  const auto model = harness::build_target("gauss1d");
  const auto target = density_from_potential(-8.0, 8.0, 801, model);
  auto rho = gaussian_density(-8.0, 8.0, 801, 1.0, 0.5);
  double kl = kl_quadrature(rho, target);
  for (int k = 0; k < 50; ++k) {
    const auto direction = solve_w_newton_direction_kl(rho, model);
    const double vmax = direction.velocity.cwiseAbs().maxCoeff();
    const double dt = std::min(0.05, 0.5 * rho.dx / std::max(vmax, 1e-12));
    rho = w_transport_step(rho, direction.phi, dt);
    const double next_kl = kl_quadrature(rho, target);
    CHECK(next_kl <= kl + 1e-10);
    kl = next_kl;
  }
}

TEST_CASE("csv round trip") {
  const auto rho = gaussian_density(-4.0, 4.0, 101, 0.0, 1.0);
  const auto path = std::filesystem::temp_directory_path() / "wnewton_grid_test.csv";
  write_csv(path.string(), rho);
  const auto loaded = read_csv(path.string());
  CHECK((loaded.x - rho.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.values - rho.values).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}

TEST_SUITE_END();
