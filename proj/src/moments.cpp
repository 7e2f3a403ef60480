#include "magstep/moments.hpp"

#include <cmath>

#include "magstep/tridiag.hpp"

namespace magstep {

// The shifted matrix is split at the peak of phi; both Dirichlet halves are
// nonsingular, and the dropped row is recovered by orthogonality.
struct ResolventFactor {
  VectorXd phi_interior;  // Euclidean-normalized
  VectorXd d, e;
  double beta = 0;
  Index peak = 0;
};

namespace {

double inv_b(double a, double tau) {
  if (tau > 0) return 1.0;
  if (tau < 0) return 1.0 / a;
  return 0.5 * (1.0 + 1.0 / a);
}

double trapezoid(const VectorXd& f, double h) {
  const Index n = f.size();
  return (f.sum() - 0.5 * (f(0) + f(n - 1))) * h;
}

}  // namespace

ResolventContext make_resolvent_context(const FiberSolution& fiber, double mu_pp) {
  auto factor = std::make_shared<ResolventFactor>();
  const Grid1D& grid = fiber.grid;
  fiber_matrix(fiber.a, fiber.xi, grid, factor->d, factor->e);
  factor->beta = fiber.mu;
  const Index m = grid.n_points - 2;
  factor->phi_interior = fiber.phi.segment(1, m);
  factor->phi_interior /= factor->phi_interior.norm();

  factor->phi_interior.maxCoeff(&factor->peak);
  if (factor->peak < 1 || factor->peak + 1 >= m)
    throw Error(ErrorCode::SingularSystem, "ground state peaks at the grid boundary");

  ResolventContext ctx;
  ctx.fiber = fiber;
  ctx.factor = factor;
  EdgeConstants& c = ctx.constants;
  c.a = fiber.a;
  c.zeta_a = fiber.xi;
  c.beta_a = fiber.mu;
  c.mu_pp = mu_pp;
  c.c2 = 0.5 * mu_pp;
  c.phi_at_0 = fiber.phi_at_0;
  c.dphi_at_0 = fiber.dphi_at_0_left;
  c.m3 = moment(ctx, 3);
  return ctx;
}

ResolventContext make_resolvent_context(double a, const FiberConfig& cfg) {
  const auto [zeta, beta] = band_minimize(a, cfg);
  (void)beta;
  const FiberSolution fiber = solve_fiber(a, zeta, cfg.whole_grid(), cfg.decay_tol);
  const double mu_pp = band_second_derivative(a, zeta, cfg);
  return make_resolvent_context(fiber, mu_pp);
}

VectorXd regularized_apply(const ResolventContext& ctx, const VectorXd& u) {
  const ResolventFactor& f = *ctx.factor;
  const Index m = f.phi_interior.size();
  if (u.size() != m + 2) throw Error(ErrorCode::GridMismatch, "vector length differs from fiber grid");
  VectorXd rhs = u.segment(1, m);
  rhs -= f.phi_interior.dot(rhs) * f.phi_interior;
  const Index j = f.peak, r = m - j - 1;
  auto split_solve = [&](const VectorXd& b) {
    VectorXd x = VectorXd::Zero(m);
    x.head(j) = tridiag_solve<double>(f.d.head(j), f.e.head(j - 1), f.beta, b.head(j));
    x.tail(r) = tridiag_solve<double>(f.d.tail(r), f.e.tail(r - 1), f.beta, b.tail(r));
    return VectorXd(x - f.phi_interior.dot(x) * f.phi_interior);
  };
  VectorXd x = split_solve(rhs);
  // one refinement sweep
  VectorXd full = VectorXd::Zero(m + 2);
  full.segment(1, m) = x;
  VectorXd defect = rhs - shifted_fiber_apply(ctx, full).segment(1, m);
  defect -= f.phi_interior.dot(defect) * f.phi_interior;
  x += split_solve(defect);
  if (!x.allFinite()) throw Error(ErrorCode::SingularSystem, "resolvent solve failed");
  VectorXd out = VectorXd::Zero(m + 2);
  out.segment(1, m) = x;
  return out;
}

VectorXd shifted_fiber_apply(const ResolventContext& ctx, const VectorXd& u) {
  const ResolventFactor& f = *ctx.factor;
  const Index m = f.d.size();
  VectorXd out = VectorXd::Zero(m + 2);
  for (Index i = 0; i < m; ++i) {
    double s = (f.d(i) - f.beta) * u(i + 1);
    if (i > 0) s += f.e(i - 1) * u(i);
    if (i + 1 < m) s += f.e(i) * u(i + 2);
    out(i + 1) = s;
  }
  return out;
}

double grid_inner(const FiberSolution& fiber, const VectorXd& u, const VectorXd& v) {
  return trapezoid(u.cwiseProduct(v), fiber.grid.spacing());
}

double moment(const ResolventContext& ctx, int n) {
  if (n < 1 || n > 3) throw Error(ErrorCode::UnsupportedMoment, "moment order " + std::to_string(n));
  const FiberSolution& s = ctx.fiber;
  const Index np = s.grid.n_points;
  VectorXd f(np);
  for (Index i = 0; i < np; ++i) {
    const double tau = s.grid.nodes(i);
    const double u = s.xi + step_field(s.a, tau) * tau;
    f(i) = inv_b(s.a, tau) * std::pow(u, n) * s.phi(i) * s.phi(i);
  }
  return trapezoid(f, s.grid.spacing());
}

double identity_tolerance(double spacing) { return std::max(1e-8, 10.0 * spacing * spacing); }

MomentReport richardson(const MomentReport& fine, const MomentReport& coarse) {
  auto ex = [](double f, double c) { return (4.0 * f - c) / 3.0; };
  MomentReport r = fine;
  for (auto& [n, v] : r.m) v = ex(fine.m.at(n), coarse.m.at(n));
  r.i2 = ex(fine.i2, coarse.i2);
  r.inv_b_mass = ex(fine.inv_b_mass, coarse.inv_b_mass);
  for (auto& [k, v] : r.identity_residuals)
    v = ex(fine.identity_residuals.at(k), coarse.identity_residuals.at(k));
  return r;
}

MomentReport identity_suite(const ResolventContext& ctx) {
  const FiberSolution& s = ctx.fiber;
  const EdgeConstants& c = ctx.constants;
  const Index np = s.grid.n_points;
  const double h = s.grid.spacing();
  const double a = s.a, zeta = s.xi, beta = s.mu;

  VectorXd ib(np), t_u(np), t_u2(np), bt2_u(np), t_p(np), w(np), stat(np);
  for (Index i = 0; i < np; ++i) {
    const double tau = s.grid.nodes(i);
    const double b = step_field(a, tau);
    const double u = zeta + b * tau;
    const double p2 = s.phi(i) * s.phi(i);
    ib(i) = inv_b(a, tau) * p2;
    t_u(i) = tau * u * p2;
    t_u2(i) = tau * u * u * p2;
    bt2_u(i) = b * tau * tau * u * p2;
    t_p(i) = tau * p2;
    w(i) = u * s.phi(i);
    stat(i) = u * p2;
  }
  double t_dphi2 = 0;
  for (Index i = 0; i + 1 < np; ++i) {
    const double tm = 0.5 * (s.grid.nodes(i) + s.grid.nodes(i + 1));
    const double dp = (s.phi(i + 1) - s.phi(i)) / h;
    t_dphi2 += tm * dp * dp * h;
  }

  MomentReport r;
  r.a = a;
  r.spacing = h;
  for (int n = 1; n <= 3; ++n) r.m[n] = moment(ctx, n);
  const double m2 = r.m[2], m3 = r.m[3];
  r.inv_b_mass = trapezoid(ib, h);
  const double boundary = (1.0 / a - 1.0) * zeta * s.phi_at_0 * s.dphi_at_0_left;
  const VectorXd rw = regularized_apply(ctx, w);
  r.i2 = grid_inner(s, w, rw);

  auto& res = r.identity_residuals;
  res["m1"] = r.m[1];
  res["m2_closed_form"] = m2 - (0.5 * beta * r.inv_b_mass + 0.25 * boundary / zeta);
  res["m3_closed_form"] = m3 - boundary / 3.0;
  res["tau_u"] = trapezoid(t_u, h) - m2;
  res["tau_u2"] = trapezoid(t_u2, h) - (m3 - zeta * m2);
  res["b_tau2_u"] = trapezoid(bt2_u, h) - (m3 - 2.0 * zeta * m2);
  res["tau_phi2"] = trapezoid(t_p, h) + zeta * r.inv_b_mass;
  res["tau_dphi2"] = t_dphi2 - (beta * zeta * r.inv_b_mass + 2.0 * m3 - 3.0 * zeta * m2);
  res["i2"] = r.i2 - (0.25 - c.mu_pp / 8.0);
  res["stationarity"] = trapezoid(stat, h);
  return r;
}

void check_edge_invariants(const EdgeConstants& c, double theta0) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvariantViolation, m); };
  if (!(c.zeta_a < 0)) fail("zeta_a must be negative");
  if (!(c.mu_pp > 0)) fail("band curvature must be positive");
  if (c.a > -1.0) {
    const double aa = std::abs(c.a);
    if (!(aa * theta0 < c.beta_a && c.beta_a < std::min(aa, theta0))) fail("beta_a outside its bounds");
    if (!(c.dphi_at_0 < 0)) fail("phi'(0) must be negative");
    if (!(c.m3 < 0)) fail("M3 must be negative");
  } else if (std::abs(c.m3) > 1e-6) {
    fail("M3 must vanish at a = -1");
  }
}

EdgeConstants edge_constants(double a, const FiberConfig& cfg, double theta0) {
  if (!(a >= -1.0 && a < 0.0))
    throw Error(ErrorCode::ConfigInvalid, "field ratio a must lie in [-1, 0)");
  const ResolventContext ctx = make_resolvent_context(a, cfg);
  if (theta0 < 0) theta0 = de_gennes_constants(cfg).theta0;
  check_edge_invariants(ctx.constants, theta0);
  return ctx.constants;
}

}  // namespace magstep
