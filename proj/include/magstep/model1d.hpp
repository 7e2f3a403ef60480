#pragma once

#include <Eigen/Core>
#include <utility>

#include "magstep/errors.hpp"

namespace magstep {

using Eigen::Index;
using Eigen::VectorXd;

struct Grid1D {
  double tau_min = 0;
  double tau_max = 0;
  Index n_points = 0;
  VectorXd nodes;

  // Uniform grid on [-half_width, half_width] with tau = 0 as a node.
  static Grid1D whole_line(double half_width, double spacing);
  // Uniform grid on [0, length].
  static Grid1D half_line(double length, double spacing);

  double spacing() const { return (tau_max - tau_min) / double(n_points - 1); }
  Index zero_index() const;
};

struct FiberConfig {
  double half_width = 30.0;
  double spacing = 0.002;
  double decay_tol = 1e-10;
  double scan_lo = -3.0;
  double scan_hi = 1.0;
  double scan_step = 0.05;
  double fd_step = 0.02;

  Grid1D whole_grid() const { return Grid1D::whole_line(half_width, spacing); }
  Grid1D half_grid() const { return Grid1D::half_line(half_width, spacing); }
};

struct FiberSolution {
  double a = 0;
  double xi = 0;
  bool neumann = false;
  Grid1D grid;
  double mu = 0;
  VectorXd phi;  // on grid.nodes, L2-normalized, endpoint values included
  double phi_at_0 = 0;
  double dphi_at_0_left = 0;
};

struct DeGennesConstants {
  double theta0 = 0;
  double xi0 = 0;
  double c1 = 0;
  double u0_at_0 = 0;
  double mu_pp = 0;  // second derivative of the Neumann band at xi0
};

struct EdgeConstants {
  double a = 0;
  double zeta_a = 0;
  double beta_a = 0;
  double mu_pp = 0;
  double c2 = 0;
  double m3 = 0;
  double phi_at_0 = 0;
  double dphi_at_0 = 0;
};

inline double step_field(double a, double tau) { return tau < 0 ? a : 1.0; }

// Three-point finite-difference matrix of the fiber operator restricted to
// interior nodes: diagonal d and off-diagonal e.
void fiber_matrix(double a, double xi, const Grid1D& grid, VectorXd& d, VectorXd& e);
void neumann_matrix(double xi, const Grid1D& grid, VectorXd& d, VectorXd& e);

double fiber_eigenvalue(double a, double xi, const Grid1D& grid);
double neumann_eigenvalue(double xi, const Grid1D& grid);

FiberSolution solve_fiber(double a, double xi, const Grid1D& grid, double decay_tol = 1e-10);
FiberSolution solve_neumann_fiber(double xi, const Grid1D& grid, double decay_tol = 1e-10);

// 2 * int (xi + b tau) phi^2, the Feynman-Hellmann derivative of the band.
double band_slope(const FiberSolution& sol);

// Minimizer and minimum of the band function. neumann selects the half-line
// de Gennes band (a is then ignored).
std::pair<double, double> band_minimize(double a, const FiberConfig& cfg, bool neumann = false);

// Second derivative at the minimizer by two-step extrapolated central
// differences. parabolic_fit, when non-null, receives the 5-point fit value.
double band_second_derivative(double a, double zeta, const FiberConfig& cfg, bool neumann = false,
                              double* parabolic_fit = nullptr);

DeGennesConstants de_gennes_constants(const FiberConfig& cfg = {});

}  // namespace magstep
