#include "magstep/model1d.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "magstep/tridiag.hpp"

namespace magstep {

Grid1D Grid1D::whole_line(double half_width, double spacing) {
  const Index half = Index(std::llround(half_width / spacing));
  Grid1D g;
  g.n_points = 2 * half + 1;
  g.tau_min = -half * spacing;
  g.tau_max = half * spacing;
  g.nodes.resize(g.n_points);
  for (Index i = 0; i < g.n_points; ++i) g.nodes(i) = double(i - half) * spacing;
  return g;
}

Grid1D Grid1D::half_line(double length, double spacing) {
  const Index n = Index(std::llround(length / spacing));
  Grid1D g;
  g.n_points = n + 1;
  g.tau_min = 0.0;
  g.tau_max = n * spacing;
  g.nodes.resize(g.n_points);
  for (Index i = 0; i <= n; ++i) g.nodes(i) = double(i) * spacing;
  return g;
}

Index Grid1D::zero_index() const {
  const Index i = Index(std::llround(-tau_min / spacing()));
  if (i < 0 || i >= n_points || std::abs(nodes(i)) > 1e-12)
    throw Error(ErrorCode::GridMismatch, "tau = 0 is not a grid node");
  return i;
}

void fiber_matrix(double a, double xi, const Grid1D& grid, VectorXd& d, VectorXd& e) {
  const Index m = grid.n_points - 2;
  const double h = grid.spacing();
  const double inv = 1.0 / (h * h);
  d.resize(m);
  e.setConstant(m - 1, -inv);
  for (Index i = 0; i < m; ++i) {
    const double tau = grid.nodes(i + 1);
    const double v = xi + step_field(a, tau) * tau;
    d(i) = 2.0 * inv + v * v;
  }
}

// Neumann row at tau = 0 eliminated with the one-sided second-order stencil
// u0 = (4 u1 - u2) / 3, then symmetrized by scaling the first unknown.
void neumann_matrix(double xi, const Grid1D& grid, VectorXd& d, VectorXd& e) {
  const Index m = grid.n_points - 2;  // unknowns u1 .. u_{n-2}
  const double h = grid.spacing();
  const double inv = 1.0 / (h * h);
  d.resize(m);
  e.setConstant(m - 1, -inv);
  for (Index i = 0; i < m; ++i) {
    const double v = xi + grid.nodes(i + 1);
    d(i) = 2.0 * inv + v * v;
  }
  d(0) = 2.0 / 3.0 * inv + (xi + grid.nodes(1)) * (xi + grid.nodes(1));
  e(0) = -std::sqrt(2.0 / 3.0) * inv;
}

double fiber_eigenvalue(double a, double xi, const Grid1D& grid) {
  VectorXd d, e;
  fiber_matrix(a, xi, grid, d, e);
  return tridiag_eigenvalue<double>(d, e, 0);
}

double neumann_eigenvalue(double xi, const Grid1D& grid) {
  VectorXd d, e;
  neumann_matrix(xi, grid, d, e);
  return tridiag_eigenvalue<double>(d, e, 0);
}

namespace {

double trapezoid_norm2(const VectorXd& f, double h) {
  const Index n = f.size();
  double s = f.squaredNorm() - 0.5 * (f(0) * f(0) + f(n - 1) * f(n - 1));
  return s * h;
}

void check_ground_state(const FiberSolution& sol, double decay_tol) {
  const Index n = sol.phi.size();
  const double peak = sol.phi.cwiseAbs().maxCoeff();
  for (Index i = 1; i + 1 < n; ++i)
    if (sol.phi(i) < -1e-12 * peak)
      throw Error(ErrorCode::NonPositiveGroundState,
                  "sign change at tau = " + std::to_string(sol.grid.nodes(i)));
  const double edge = std::max(std::abs(sol.phi(n - 2)), sol.neumann ? 0.0 : std::abs(sol.phi(1)));
  if (edge > decay_tol)
    throw Error(ErrorCode::GridTooNarrow,
                "boundary value " + std::to_string(edge) + " exceeds decay tolerance");
  if (!(sol.mu > 0))
    throw Error(ErrorCode::NonPositiveGroundState, "non-positive eigenvalue");
}

}  // namespace

FiberSolution solve_fiber(double a, double xi, const Grid1D& grid, double decay_tol) {
  VectorXd d, e;
  fiber_matrix(a, xi, grid, d, e);
  FiberSolution sol;
  sol.a = a;
  sol.xi = xi;
  sol.grid = grid;
  sol.mu = tridiag_eigenvalue<double>(d, e, 0);
  const VectorXd v = inverse_iteration<double>(d, e, sol.mu);
  const double h = grid.spacing();
  sol.phi = VectorXd::Zero(grid.n_points);
  sol.phi.segment(1, grid.n_points - 2) = v;
  sol.phi /= std::sqrt(trapezoid_norm2(sol.phi, h));
  const Index z = grid.zero_index();
  sol.phi_at_0 = sol.phi(z);
  sol.dphi_at_0_left = (3.0 * sol.phi(z) - 4.0 * sol.phi(z - 1) + sol.phi(z - 2)) / (2.0 * h);
  check_ground_state(sol, decay_tol);
  return sol;
}

FiberSolution solve_neumann_fiber(double xi, const Grid1D& grid, double decay_tol) {
  VectorXd d, e;
  neumann_matrix(xi, grid, d, e);
  FiberSolution sol;
  sol.a = 1.0;
  sol.xi = xi;
  sol.neumann = true;
  sol.grid = grid;
  sol.mu = tridiag_eigenvalue<double>(d, e, 0);
  VectorXd v = inverse_iteration<double>(d, e, sol.mu);
  v(0) /= std::sqrt(1.5);
  const double h = grid.spacing();
  sol.phi = VectorXd::Zero(grid.n_points);
  sol.phi.segment(1, grid.n_points - 2) = v;
  sol.phi(0) = (4.0 * sol.phi(1) - sol.phi(2)) / 3.0;
  sol.phi /= std::sqrt(trapezoid_norm2(sol.phi, h));
  sol.phi_at_0 = sol.phi(0);
  sol.dphi_at_0_left = 0.0;
  check_ground_state(sol, decay_tol);
  return sol;
}

double band_slope(const FiberSolution& sol) {
  const Index n = sol.phi.size();
  const double h = sol.grid.spacing();
  double s = 0;
  for (Index i = 0; i < n; ++i) {
    const double tau = sol.grid.nodes(i);
    const double b = sol.neumann ? 1.0 : step_field(sol.a, tau);
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    s += w * (sol.xi + b * tau) * sol.phi(i) * sol.phi(i);
  }
  return 2.0 * s * h;
}

namespace {

// Exact derivative of the discrete eigenvalue (discrete Feynman-Hellmann on
// the symmetric matrix).
double discrete_slope(double a, double xi, const Grid1D& grid, bool neumann) {
  VectorXd d, e;
  if (neumann)
    neumann_matrix(xi, grid, d, e);
  else
    fiber_matrix(a, xi, grid, d, e);
  const double mu = tridiag_eigenvalue<double>(d, e, 0);
  const VectorXd v = inverse_iteration<double>(d, e, mu);
  double s = 0;
  for (Index i = 0; i < v.size(); ++i) {
    const double tau = grid.nodes(i + 1);
    const double b = neumann ? 1.0 : step_field(a, tau);
    s += 2.0 * (xi + b * tau) * v(i) * v(i);
  }
  return s / v.squaredNorm();
}

}  // namespace

std::pair<double, double> band_minimize(double a, const FiberConfig& cfg, bool neumann) {
  const Grid1D grid = neumann ? cfg.half_grid() : cfg.whole_grid();
  auto mu_on = [&](double xi, const Grid1D& g) {
    return neumann ? neumann_eigenvalue(xi, g) : fiber_eigenvalue(a, xi, g);
  };
  auto mu = [&](double xi) { return mu_on(xi, grid); };
  // coarse scan only locates the bracket
  FiberConfig coarse = cfg;
  coarse.spacing = std::max(cfg.spacing, 0.02);
  const Grid1D scan_grid = neumann ? coarse.half_grid() : coarse.whole_grid();
  const int n = int(std::floor((cfg.scan_hi - cfg.scan_lo) / cfg.scan_step + 1e-9)) + 1;
  std::vector<double> vals(n);
  int best = 0;
  for (int i = 0; i < n; ++i) {
    vals[i] = mu_on(cfg.scan_lo + i * cfg.scan_step, scan_grid);
    if (vals[i] < vals[best]) best = i;
  }
  if (best == 0 || best == n - 1)
    throw Error(ErrorCode::BracketingFailed, "band minimum on the scan window boundary");

  // Brent minimization (golden section with parabolic steps).
  const double cgold = 0.3819660112501051;
  double lo = cfg.scan_lo + (best - 1) * cfg.scan_step;
  double hi = cfg.scan_lo + (best + 1) * cfg.scan_step;
  double x = cfg.scan_lo + best * cfg.scan_step, w = x, v = x;
  double fx = mu(x), fw = fx, fv = fx;
  double step = 0, prev = 0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double tol = 1e-8 * std::abs(x) + 1e-10;
    if (std::abs(x - mid) <= 2 * tol - 0.5 * (hi - lo)) break;
    bool golden = true;
    if (std::abs(prev) > tol) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2 * (q - r);
      if (q > 0) p = -p;
      q = std::abs(q);
      if (std::abs(p) < std::abs(0.5 * q * prev) && p > q * (lo - x) && p < q * (hi - x)) {
        prev = step;
        step = p / q;
        golden = false;
      }
    }
    if (golden) {
      prev = (x >= mid) ? lo - x : hi - x;
      step = cgold * prev;
    }
    const double u = x + (std::abs(step) >= tol ? step : (step > 0 ? tol : -tol));
    const double fu = mu(u);
    if (fu <= fx) {
      (u >= x ? lo : hi) = x;
      v = w; fv = fw; w = x; fw = fx; x = u; fx = fu;
    } else {
      (u < x ? lo : hi) = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw; w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }

  // Polish on the Feynman-Hellmann derivative (secant, bracket-safeguarded).
  double x0 = x - 1e-4, x1 = x + 1e-4;
  double g0 = discrete_slope(a, x0, grid, neumann), g1 = discrete_slope(a, x1, grid, neumann);
  for (int it = 0; it < 30 && g1 != g0; ++it) {
    const double x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
    x0 = x1; g0 = g1;
    x1 = x2;
    g1 = discrete_slope(a, x1, grid, neumann);
    if (std::abs(x1 - x0) < 1e-14) break;
  }
  if (std::abs(x1 - x) < 1e-3) x = x1;
  return {x, mu(x)};
}

double band_second_derivative(double a, double zeta, const FiberConfig& cfg, bool neumann,
                              double* parabolic_fit) {
  const Grid1D grid = neumann ? cfg.half_grid() : cfg.whole_grid();
  auto mu = [&](double xi) {
    return neumann ? neumann_eigenvalue(xi, grid) : fiber_eigenvalue(a, xi, grid);
  };
  const double dlt = cfg.fd_step;
  const double m0 = mu(zeta);
  const double mp1 = mu(zeta + dlt), mm1 = mu(zeta - dlt);
  const double mp2 = mu(zeta + 2 * dlt), mm2 = mu(zeta - 2 * dlt);
  const double d_half = (mp1 - 2 * m0 + mm1) / (dlt * dlt);
  const double d_full = (mp2 - 2 * m0 + mm2) / (4 * dlt * dlt);
  const double mu_pp = (4.0 * d_half - d_full) / 3.0;
  if (parabolic_fit) {
    // least-squares quadratic through the 5 samples; offsets -2..2
    const double xs[5] = {-2, -1, 0, 1, 2};
    const double ys[5] = {mm2, mm1, m0, mp1, mp2};
    // orthogonal basis: 1, x, x^2 - 2 ; sum (x^2-2)^2 = 14
    double c2 = 0;
    for (int i = 0; i < 5; ++i) c2 += (xs[i] * xs[i] - 2) * ys[i];
    c2 /= 14.0;
    *parabolic_fit = 2.0 * c2 / (dlt * dlt);
  }
  if (!(mu_pp > 0))
    throw Error(ErrorCode::NonConvexAtMinimum, "band curvature estimate is not positive");
  return mu_pp;
}

DeGennesConstants de_gennes_constants(const FiberConfig& cfg) {
  const auto [xi0, theta0] = band_minimize(1.0, cfg, true);
  const FiberSolution sol = solve_neumann_fiber(xi0, cfg.half_grid(), cfg.decay_tol);
  DeGennesConstants c;
  c.theta0 = theta0;
  c.xi0 = xi0;
  c.u0_at_0 = sol.phi_at_0;
  c.c1 = sol.phi_at_0 * sol.phi_at_0 / 3.0;
  c.mu_pp = band_second_derivative(1.0, xi0, cfg, true);
  return c;
}

}  // namespace magstep
