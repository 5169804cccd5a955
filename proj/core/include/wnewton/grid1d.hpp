#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <variant>

#include "wnewton/errors.hpp"
#include "wnewton/types.hpp"

namespace wnewton::grid {

/// Nonnegative density on a uniform 1D grid with unit mass in the
/// rectangle-rule sense: sum(values) * dx == 1.
struct GridDensity {
  Eigen::VectorXd x;
  Eigen::VectorXd values;
  double dx = 0.0;

  int size() const { return static_cast<int>(values.size()); }
  double mass() const { return values.sum() * dx; }
};

/// Cotangent grid vector, defined up to an additive constant.
struct GridFunction {
  Eigen::VectorXd values;
};

struct Kl1d {
  std::function<double(double)> potential;  // f
  std::function<double(double)> curvature;  // f'' (Wasserstein Hessian only)
};

struct Interaction1d {
  std::function<double(double, double)> kernel;      // W(x,y), symmetric
  std::function<double(double, double)> kernel_xx;   // d2W/dx2
  std::function<double(double, double)> kernel_xy;   // d2W/dxdy
};

struct ReverseKl1d {
  GridDensity target;
};

using Functional1d = std::variant<Kl1d, Interaction1d, ReverseKl1d>;

enum class Metric1d { FisherRao, Wasserstein };

inline constexpr double kDensityFloor = 1e-300;

/// Uniform grid on [lo, hi] carrying the normalized nonnegative values of
/// `unnormalized`.
GridDensity make_grid_density(double lo, double hi, int points,
                              const std::function<double(double)>& unnormalized);

/// Normalized exp(-potential) of a 1D target model on [lo, hi].
GridDensity density_from_potential(double lo, double hi, int points, const TargetModel& model);

/// Trapezoid quadrature of a grid vector.
double trapezoid(const GridDensity& rho, const Eigen::VectorXd& values);

/// Quadrature KL divergence between two densities on the same grid.
double kl_quadrature(const GridDensity& rho, const GridDensity& target);

/// Pointwise first variation of the functional at rho. Densities are floored
/// at kDensityFloor where logs or ratios need them; `floored` reports it.
GridFunction first_variation(const Functional1d& functional, const GridDensity& rho,
                             bool* floored = nullptr);

/// Fisher-Rao gradient rho (dE - E_rho[dE]); integrates to zero.
Eigen::VectorXd fr_gradient(const GridDensity& rho, const GridFunction& variation);

/// Wasserstein gradient -d/dx(rho dE') as a conservative face-flux
/// divergence with zero-flux boundaries; sums to zero by telescoping.
Eigen::VectorXd w_gradient(const GridDensity& rho, const GridFunction& variation);

/// Applies the Hessian operator of the functional under the metric. Every
/// combination is discretized from its symmetric quadratic form, so the
/// result is self-adjoint in the trapezoid inner product to rounding.
Eigen::VectorXd hessian_apply(Metric1d metric, const Functional1d& functional,
                              const GridDensity& rho, const GridFunction& phi);

struct NewtonDirection1d {
  GridFunction phi;          // cumulative integral of the velocity
  Eigen::VectorXd velocity;  // u = phi' on the full grid, affine outside the window
  int window_begin = 0;      // inclusive
  int window_end = 0;        // inclusive
  double residual = 0.0;     // max abs residual of the discrete ODE, interior rows
};

/// Solves the once-integrated Newton-direction ODE
///   u'' + u' (log rho)' - f'' u - f' - (log rho)' = 0
/// on the window where rho >= thresh_factor * max(rho), second-order central
/// differences with u'' = 0 closure at the window ends.
NewtonDirection1d solve_w_newton_direction_kl(const GridDensity& rho, const TargetModel& model,
                                              double thresh_factor = 1e-8);

/// One Fisher-Rao Newton step for KL: solve the regularized Hessian system
/// for phi, explicit Euler on rho(phi - E[phi]), clip, renormalize. `eta`
/// scales the regularizer relative to the operator norm.
GridDensity fr_newton_step(const GridDensity& rho, const TargetModel& model, double dt,
                           double eta);

/// Conservative upwind transport step for the continuity equation with
/// velocity phi'. Throws StepTooLarge when dt max|phi'| > dx.
GridDensity w_transport_step(const GridDensity& rho, const GridFunction& phi, double dt);

void write_csv(const std::string& path, const GridDensity& rho);
GridDensity read_csv(const std::string& path);

}  // namespace wnewton::grid
