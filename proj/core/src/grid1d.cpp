#include "wnewton/grid1d.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace wnewton::grid {

namespace {

Eigen::VectorXd trapezoid_weights(int n, double dx) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, dx);
  w[0] = 0.5 * dx;
  w[n - 1] = 0.5 * dx;
  return w;
}

// faces live between nodes j and j+1, so there are J-1 of them
Eigen::VectorXd face_diff(const Eigen::VectorXd& v, double dx) {
  const int n = static_cast<int>(v.size());
  return (v.tail(n - 1) - v.head(n - 1)) / dx;
}

Eigen::VectorXd face_average(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  return 0.5 * (v.tail(n - 1) + v.head(n - 1));
}

// adjoint of face_diff under plain coordinate dot products
Eigen::VectorXd face_diff_adjoint(const Eigen::VectorXd& s, double dx) {
  const int n = static_cast<int>(s.size()) + 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  out.head(n - 1) -= s / dx;
  out.tail(n - 1) += s / dx;
  return out;
}

// interior second difference, zero on boundary rows
Eigen::VectorXd second_diff(const Eigen::VectorXd& v, double dx) {
  const int n = static_cast<int>(v.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int j = 1; j + 1 < n; ++j) out[j] = (v[j - 1] - 2.0 * v[j] + v[j + 1]) / (dx * dx);
  return out;
}

// adjoint of second_diff for inputs vanishing at the boundary rows; the
// output boundary rows are NOT zero
Eigen::VectorXd second_diff_adjoint(const Eigen::VectorXd& s, double dx) {
  const int n = static_cast<int>(s.size());
  Eigen::VectorXd out(n);
  for (int j = 0; j < n; ++j) {
    const double left = j > 0 ? s[j - 1] : 0.0;
    const double right = j + 1 < n ? s[j + 1] : 0.0;
    out[j] = (left - 2.0 * s[j] + right) / (dx * dx);
  }
  return out;
}

Eigen::VectorXd floored(const Eigen::VectorXd& rho, bool* flag) {
  Eigen::VectorXd out = rho;
  for (Eigen::Index j = 0; j < out.size(); ++j)
    if (out[j] < kDensityFloor) {
      out[j] = kDensityFloor;
      if (flag) *flag = true;
    }
  return out;
}

void check_same_grid(const GridDensity& a, const GridDensity& b, const char* what) {
  if (a.size() != b.size() || std::abs(a.dx - b.dx) > 1e-14 * a.dx)
    throw InvalidInput(std::string(what) + ": grids do not match");
}

// weighted pairing m[v] = sum w v rho used by the Fisher-Rao formulas
struct FrWorkspace {
  Eigen::VectorXd w;
  double pair(const Eigen::VectorXd& a, const Eigen::VectorXd& rho) const {
    return (w.array() * a.array() * rho.array()).sum();
  }
};

Eigen::MatrixXd kernel_matrix(const std::function<double(double, double)>& fn,
                              const Eigen::VectorXd& xs, const Eigen::VectorXd& ys) {
  Eigen::MatrixXd mat(xs.size(), ys.size());
  for (Eigen::Index i = 0; i < xs.size(); ++i)
    for (Eigen::Index j = 0; j < ys.size(); ++j) mat(i, j) = fn(xs[i], ys[j]);
  return mat;
}

}  // namespace

GridDensity make_grid_density(double lo, double hi, int points,
                              const std::function<double(double)>& unnormalized) {
  if (points < 2) throw InvalidInput("make_grid_density: need at least two points");
  if (!(hi > lo)) throw InvalidInput("make_grid_density: empty interval");
  GridDensity rho;
  rho.x = Eigen::VectorXd::LinSpaced(points, lo, hi);
  rho.dx = (hi - lo) / static_cast<double>(points - 1);
  rho.values.resize(points);
  for (int j = 0; j < points; ++j) rho.values[j] = std::max(unnormalized(rho.x[j]), 0.0);
  const double mass = rho.values.sum() * rho.dx;
  if (!(mass > 0.0)) throw InvalidInput("make_grid_density: zero mass on the grid");
  rho.values /= mass;
  return rho;
}

GridDensity density_from_potential(double lo, double hi, int points, const TargetModel& model) {
  if (model.dim != 1) throw InvalidInput("density_from_potential: model must be 1D");
  return make_grid_density(lo, hi, points, [&](double x) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return std::exp(-model.potential(v));
  });
}

double trapezoid(const GridDensity& rho, const Eigen::VectorXd& values) {
  return trapezoid_weights(rho.size(), rho.dx).dot(values);
}

double kl_quadrature(const GridDensity& rho, const GridDensity& target) {
  check_same_grid(rho, target, "kl_quadrature");
  const Eigen::VectorXd w = trapezoid_weights(rho.size(), rho.dx);
  double total = 0.0;
  for (int j = 0; j < rho.size(); ++j) {
    const double p = rho.values[j];
    if (p <= 0.0) continue;
    const double q = std::max(target.values[j], kDensityFloor);
    total += w[j] * p * std::log(p / q);
  }
  return total;
}

GridFunction first_variation(const Functional1d& functional, const GridDensity& rho,
                             bool* floored_flag) {
  if (floored_flag) *floored_flag = false;
  const int n = rho.size();
  GridFunction out;
  out.values.resize(n);

  if (const auto* kl = std::get_if<Kl1d>(&functional)) {
    const Eigen::VectorXd safe = floored(rho.values, floored_flag);
    for (int j = 0; j < n; ++j)
      out.values[j] = std::log(safe[j]) + kl->potential(rho.x[j]) + 1.0;
    return out;
  }
  if (const auto* inter = std::get_if<Interaction1d>(&functional)) {
    const Eigen::VectorXd w = trapezoid_weights(n, rho.dx);
    const Eigen::MatrixXd mat = kernel_matrix(inter->kernel, rho.x, rho.x);
    out.values = mat * w.cwiseProduct(rho.values);
    return out;
  }
  const auto& rkl = std::get<ReverseKl1d>(functional);
  check_same_grid(rho, rkl.target, "first_variation");
  const Eigen::VectorXd safe = floored(rho.values, floored_flag);
  out.values = -rkl.target.values.cwiseQuotient(safe);
  return out;
}

Eigen::VectorXd fr_gradient(const GridDensity& rho, const GridFunction& variation) {
  FrWorkspace fr{trapezoid_weights(rho.size(), rho.dx)};
  const double mass = fr.pair(Eigen::VectorXd::Ones(rho.size()), rho.values);
  const double centered = fr.pair(variation.values, rho.values) / mass;
  return rho.values.cwiseProduct(variation.values.array() - centered).matrix();
}

Eigen::VectorXd w_gradient(const GridDensity& rho, const GridFunction& variation) {
  const Eigen::VectorXd flux =
      face_average(rho.values).cwiseProduct(face_diff(variation.values, rho.dx));
  // -div(flux) with zero-flux boundaries; face_diff_adjoint is exactly -div
  return face_diff_adjoint(flux, rho.dx);
}

Eigen::VectorXd hessian_apply(Metric1d metric, const Functional1d& functional,
                              const GridDensity& rho, const GridFunction& phi) {
  const int n = rho.size();
  const double dx = rho.dx;
  const Eigen::VectorXd w = trapezoid_weights(n, dx);
  FrWorkspace fr{w};

  if (metric == Metric1d::FisherRao) {
    Eigen::VectorXd result;
    if (const auto* kl = std::get_if<Kl1d>(&functional)) {
      const Eigen::VectorXd safe = floored(rho.values, nullptr);
      Eigen::VectorXd g(n);
      for (int j = 0; j < n; ++j) g[j] = std::log(safe[j]) + kl->potential(rho.x[j]);
      const double gbar = fr.pair(g, rho.values);
      const double phibar = fr.pair(phi.values, rho.values);
      const double cross = fr.pair(g.cwiseProduct(phi.values), rho.values);
      result = 0.5 * ((g.array() + 2.0 - gbar) * (phi.values.array() - phibar) *
                      rho.values.array())
                         .matrix();
      result -= 0.5 * (cross - phibar * gbar) * rho.values;
      return result;
    }
    if (const auto* inter = std::get_if<Interaction1d>(&functional)) {
      const Eigen::MatrixXd mat = kernel_matrix(inter->kernel, rho.x, rho.x);
      const Eigen::VectorXd conv = mat * w.cwiseProduct(rho.values);
      const Eigen::VectorXd conv_phi = mat * w.cwiseProduct(rho.values).cwiseProduct(phi.values);
      const double qbar = fr.pair(conv, rho.values);
      const double phibar = fr.pair(phi.values, rho.values);
      const double cross = fr.pair(conv.cwiseProduct(phi.values), rho.values);
      const double conv_phi_bar = fr.pair(conv_phi, rho.values);
      result = 0.5 * ((conv.array() - qbar) * (phi.values.array() - phibar) *
                      rho.values.array())
                         .matrix();
      result -= 0.5 * (cross - phibar * qbar) * rho.values;
      result += (conv_phi.array() - conv_phi_bar).matrix().cwiseProduct(rho.values);
      result -= phibar * (conv.array() - qbar).matrix().cwiseProduct(rho.values);
      return result;
    }
    const auto& rkl = std::get<ReverseKl1d>(functional);
    check_same_grid(rho, rkl.target, "hessian_apply");
    const double mean_target = fr.pair(phi.values, rkl.target.values);
    const double mean_rho = fr.pair(phi.values, rho.values);
    result = 0.5 * (phi.values.array() - mean_target).matrix().cwiseProduct(rho.values);
    result += 0.5 * (phi.values.array() - mean_rho).matrix().cwiseProduct(rkl.target.values);
    return result;
  }

  // Wasserstein metric: assembled from the symmetric quadratic form so the
  // trapezoid-weighted matrix is symmetric by construction.
  const Eigen::VectorXd w_face =
      Eigen::VectorXd::Constant(n - 1, dx);  // interior faces carry full weight
  const Eigen::VectorXd rho_face = face_average(rho.values);
  const Eigen::VectorXd dphi = face_diff(phi.values, dx);
  const Eigen::VectorXd winv = w.cwiseInverse();

  if (const auto* kl = std::get_if<Kl1d>(&functional)) {
    if (!kl->curvature) throw InvalidInput("hessian_apply: Kl1d needs a curvature callable");
    // (rho phi'')'' - (rho f'' phi')'
    const Eigen::VectorXd d2phi = second_diff(phi.values, dx);
    const Eigen::VectorXd bending =
        second_diff_adjoint(w.cwiseProduct(rho.values).cwiseProduct(d2phi), dx);
    Eigen::VectorXd curv_face(n - 1);
    for (int j = 0; j < n - 1; ++j) curv_face[j] = kl->curvature(rho.x[j] + 0.5 * dx);
    const Eigen::VectorXd stiff = face_diff_adjoint(
        w_face.cwiseProduct(rho_face).cwiseProduct(curv_face).cwiseProduct(dphi), dx);
    return winv.cwiseProduct(bending + stiff);
  }
  if (const auto* inter = std::get_if<Interaction1d>(&functional)) {
    Eigen::VectorXd faces(n - 1);
    for (int j = 0; j < n - 1; ++j) faces[j] = rho.x[j] + 0.5 * dx;
    Eigen::MatrixXd mixed = kernel_matrix(inter->kernel_xy, faces, faces);
    mixed = 0.5 * (mixed + mixed.transpose()).eval();
    const Eigen::MatrixXd second_x = kernel_matrix(inter->kernel_xx, faces, rho.x);
    const Eigen::VectorXd conv_xx = second_x * w.cwiseProduct(rho.values);
    const Eigen::VectorXd weighted = w_face.cwiseProduct(rho_face);
    Eigen::VectorXd face_out = weighted.cwiseProduct(mixed * weighted.cwiseProduct(dphi));
    face_out += weighted.cwiseProduct(conv_xx).cwiseProduct(dphi);
    return winv.cwiseProduct(face_diff_adjoint(face_out, dx));
  }
  const auto& rkl = std::get<ReverseKl1d>(functional);
  check_same_grid(rho, rkl.target, "hessian_apply");
  const Eigen::VectorXd safe = floored(rho.values, nullptr);
  // div(rho grad phi) with zero-flux boundaries; symmetric as a matrix
  const auto laplace = [&](const Eigen::VectorXd& v) {
    return (-face_diff_adjoint(rho_face.cwiseProduct(face_diff(v, dx)), dx)).eval();
  };
  const Eigen::VectorXd lphi = laplace(phi.values);
  const Eigen::VectorXd ratio2 =
      rkl.target.values.cwiseQuotient(safe.cwiseProduct(safe));  // rho*/rho^2
  const Eigen::VectorXd term1 = laplace(w.cwiseProduct(ratio2).cwiseProduct(lphi));
  const Eigen::VectorXd ratio = rkl.target.values.cwiseQuotient(safe);
  const Eigen::VectorXd ratio_dd = second_diff(ratio, dx);
  Eigen::VectorXd ratio_dd_face = face_average(ratio_dd);
  // one-sided copies at the first/last face where the node stencil is empty
  ratio_dd_face[0] = ratio_dd[1];
  ratio_dd_face[n - 2] = ratio_dd[n - 2];
  const Eigen::VectorXd term2 = -face_diff_adjoint(
      w_face.cwiseProduct(rho_face).cwiseProduct(ratio_dd_face).cwiseProduct(dphi), dx);
  return winv.cwiseProduct(term1 + term2);
}

NewtonDirection1d solve_w_newton_direction_kl(const GridDensity& rho, const TargetModel& model,
                                              double thresh_factor) {
  if (model.dim != 1) throw InvalidInput("solve_w_newton_direction_kl: model must be 1D");
  const int n = rho.size();
  const double dx = rho.dx;
  const double thresh = thresh_factor * rho.values.maxCoeff();

  int first = 0;
  while (first < n && rho.values[first] < thresh) ++first;
  int last = n - 1;
  while (last >= 0 && rho.values[last] < thresh) --last;
  const int len = last - first + 1;
  if (first >= last || len < 5)
    throw InsufficientSupport("solve_w_newton_direction_kl: support window shorter than 5 points");

  Eigen::VectorXd logrho(len);
  for (int i = 0; i < len; ++i)
    logrho[i] = std::log(std::max(rho.values[first + i], kDensityFloor));

  const auto f_prime = [&](double x) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return model.gradient(v)[0];
  };
  const auto f_second = [&](double x) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return model.hessian(v)(0, 0);
  };

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(3 * len));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(len);

  // affine far-field closure: u'' = 0 at both window ends
  entries.emplace_back(0, 0, 1.0);
  entries.emplace_back(0, 1, -2.0);
  entries.emplace_back(0, 2, 1.0);
  entries.emplace_back(len - 1, len - 3, 1.0);
  entries.emplace_back(len - 1, len - 2, -2.0);
  entries.emplace_back(len - 1, len - 1, 1.0);

  const double inv_dx2 = 1.0 / (dx * dx);
  for (int i = 1; i + 1 < len; ++i) {
    const double x = rho.x[first + i];
    const double slope = (logrho[i + 1] - logrho[i - 1]) / (2.0 * dx);
    entries.emplace_back(i, i - 1, inv_dx2 - 0.5 * slope / dx);
    entries.emplace_back(i, i, -2.0 * inv_dx2 - f_second(x));
    entries.emplace_back(i, i + 1, inv_dx2 + 0.5 * slope / dx);
    rhs[i] = f_prime(x) + slope;
  }

  Eigen::SparseMatrix<double> mat(len, len);
  mat.setFromTriplets(entries.begin(), entries.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(mat);
  if (lu.info() != Eigen::Success)
    throw Error("solve_w_newton_direction_kl: boundary-value solve failed");
  const Eigen::VectorXd u = lu.solve(rhs);

  NewtonDirection1d out;
  out.window_begin = first;
  out.window_end = last;
  out.residual = (mat * u - rhs).segment(1, len - 2).cwiseAbs().maxCoeff();

  out.velocity.resize(n);
  out.velocity.segment(first, len) = u;
  const double left_slope = (u[1] - u[0]) / dx;
  for (int j = first - 1; j >= 0; --j)
    out.velocity[j] = u[0] + left_slope * (rho.x[j] - rho.x[first]);
  const double right_slope = (u[len - 1] - u[len - 2]) / dx;
  for (int j = last + 1; j < n; ++j)
    out.velocity[j] = u[len - 1] + right_slope * (rho.x[j] - rho.x[last]);

  out.phi.values.resize(n);
  out.phi.values[0] = 0.0;
  for (int j = 1; j < n; ++j)
    out.phi.values[j] =
        out.phi.values[j - 1] + 0.5 * dx * (out.velocity[j - 1] + out.velocity[j]);
  return out;
}

GridDensity fr_newton_step(const GridDensity& rho, const TargetModel& model, double dt,
                           double eta) {
  if (model.dim != 1) throw InvalidInput("fr_newton_step: model must be 1D");
  const int n = rho.size();
  const Eigen::VectorXd w = trapezoid_weights(n, rho.dx);
  FrWorkspace fr{w};

  const Eigen::VectorXd safe = floored(rho.values, nullptr);
  Eigen::VectorXd g(n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd v(1);
    v[0] = rho.x[j];
    g[j] = std::log(safe[j]) + model.potential(v);
  }
  const double gbar = fr.pair(g, rho.values);

  // trapezoid-weighted Fisher-Rao KL Hessian, symmetric in closed form
  const Eigen::VectorXd wr = w.cwiseProduct(rho.values);
  Eigen::MatrixXd lhs(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      lhs(j, k) = -0.5 * wr[j] * wr[k] * (2.0 + g[j] + g[k] - 2.0 * gbar);
  for (int j = 0; j < n; ++j) lhs(j, j) += 0.5 * w[j] * (2.0 + g[j] - gbar) * rho.values[j];

  double op_norm = 0.0;
  for (int j = 0; j < n; ++j) op_norm = std::max(op_norm, lhs.row(j).cwiseAbs().sum() / w[j]);
  lhs += (eta * op_norm) * w.asDiagonal();

  GridFunction variation;
  variation.values = g.array() + 1.0;
  const Eigen::VectorXd grad = fr_gradient(rho, variation);
  const Eigen::VectorXd rhs = -w.cwiseProduct(grad);

  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (!lu.isInvertible())
    throw Error("fr_newton_step: Hessian solve failed (matrix numerically singular)");
  const Eigen::VectorXd phi = lu.solve(rhs);

  const double mass = fr.pair(Eigen::VectorXd::Ones(n), rho.values);
  const double centered = fr.pair(phi, rho.values) / mass;
  const Eigen::VectorXd tangent =
      rho.values.cwiseProduct((phi.array() - centered).matrix());

  GridDensity next = rho;
  next.values += dt * tangent;
  next.values = next.values.cwiseMax(kDensityFloor);
  next.values /= next.values.sum() * next.dx;
  return next;
}

GridDensity w_transport_step(const GridDensity& rho, const GridFunction& phi, double dt) {
  const int n = rho.size();
  const double dx = rho.dx;
  const Eigen::VectorXd velocity = face_diff(phi.values, dx);
  const double vmax = velocity.cwiseAbs().maxCoeff();
  if (dt * vmax > dx) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "w_transport_step: CFL violated (dt*max|v| = %.3e > dx = %.3e); try dt <= %.3e",
                  dt * vmax, dx, dx / vmax);
    throw StepTooLarge(msg);
  }

  Eigen::VectorXd flux(n - 1);
  for (int f = 0; f < n - 1; ++f) {
    const double v = velocity[f];
    flux[f] = v > 0.0 ? v * rho.values[f] : v * rho.values[f + 1];
  }

  GridDensity next = rho;
  for (int j = 0; j < n; ++j) {
    const double right = j < n - 1 ? flux[j] : 0.0;
    const double left = j > 0 ? flux[j - 1] : 0.0;
    next.values[j] = rho.values[j] - dt / dx * (right - left);
    if (next.values[j] < 0.0) next.values[j] = 0.0;  // rounding guard under CFL
  }
  return next;
}

void write_csv(const std::string& path, const GridDensity& rho) {
  std::ofstream out(path);
  if (!out) throw Error("write_csv: cannot open " + path);
  out << "x,rho\n";
  char line[80];
  for (int j = 0; j < rho.size(); ++j) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g\n", rho.x[j], rho.values[j]);
    out << line;
  }
}

GridDensity read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("read_csv: cannot open " + path);
  std::string header;
  std::getline(in, header);
  std::vector<double> xs, vals;
  double a, b;
  char comma;
  while (in >> a >> comma >> b) {
    xs.push_back(a);
    vals.push_back(b);
  }
  if (xs.size() < 2) throw Error("read_csv: too few rows in " + path);
  GridDensity rho;
  rho.x = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  rho.values =
      Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  rho.dx = rho.x[1] - rho.x[0];
  return rho;
}

}  // namespace wnewton::grid
