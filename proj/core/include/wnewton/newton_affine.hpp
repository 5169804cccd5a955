#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "wnewton/score.hpp"
#include "wnewton/types.hpp"

namespace wnewton::affine {

/// Direction restricted to Phi(x) = 0.5 x' diag(scale) x + offset' x,
/// so grad Phi(x) = diag(scale) x + offset.
struct AffineDirection {
  Eigen::VectorXd scale;
  Eigen::VectorXd offset;
};

struct QuadraticSystem {
  Eigen::MatrixXd mat;  // 2d x 2d, exactly symmetric
  Eigen::VectorXd rhs;  // 2d
};

/// Normal-equation assembly for the diagonal-quadratic basis. With
/// A_i = hessian(x_i) + eps I and v_i = grad f(x_i) + xi(x_i):
///   mat = [[I + avg diag(x) A diag(x), avg diag(x) A],
///          [avg A diag(x),             avg A        ]]
///   rhs = [avg diag(x) v; avg v]
QuadraticSystem assemble_quadratic_system(const ParticleEnsemble& ensemble,
                                          const TargetModel& model,
                                          const score::ScoreEstimate& score, double eps);

struct SolveInfo {
  bool used_pseudo_inverse = false;
  double residual = 0.0;
};

/// Solves (mat + ridge I) [scale; offset] = -rhs by symmetric eigen
/// factorization; near-singular spectra fall back to a pseudo-inverse with
/// relative cutoff 1e-12 and set the flag.
AffineDirection solve_affine_direction(const Eigen::MatrixXd& mat, const Eigen::VectorXd& rhs,
                                       double ridge, SolveInfo* info = nullptr);

/// Default ridge: 1e-10 * trace(mat) / size.
double default_ridge(const Eigen::MatrixXd& mat);

struct BasisFunction {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
};

struct GeneralBasis {
  std::vector<BasisFunction> functions;
  int size() const { return static_cast<int>(functions.size()); }
};

struct GeneralSystem {
  Eigen::MatrixXd mat;  // m x m: curvature + hessian-product terms
  Eigen::VectorXd rhs;  // m
};

/// General finite-basis assembly: with the m x d Jacobian G(x) of the basis,
///   mat = avg G (hessian + eps I) G' + D,  D_{ab} = avg tr(hess psi_a hess psi_b)
///   rhs = avg G (grad f + xi)
GeneralSystem assemble_general_basis(const ParticleEnsemble& ensemble, const TargetModel& model,
                                     const score::ScoreEstimate& score, double eps,
                                     const GeneralBasis& basis);

/// Coefficients a = -(mat + ridge I)^-1 rhs through the same symmetric solve.
Eigen::VectorXd solve_general_coefficients(const GeneralSystem& system, double ridge,
                                           SolveInfo* info = nullptr);

/// Pointwise grad Phi at the query rows.
Eigen::MatrixXd evaluate_affine(const AffineDirection& direction, const Eigen::MatrixXd& at);

/// Diagonal-quadratic basis {x_1..x_d, x_1^2..x_d^2} as a GeneralBasis.
GeneralBasis diagonal_quadratic_basis(int dim);

}  // namespace wnewton::affine
