#include "magstep/wkb.hpp"

#include <algorithm>
#include <cmath>

#include "magstep/fit.hpp"
#include "magstep/quadrature.hpp"

namespace magstep {

namespace {

constexpr cplx I{0.0, 1.0};

VectorXc d1(const VectorXc& u, double h) {
  const Index n = u.size();
  VectorXc out = VectorXc::Zero(n);
  for (Index i = 1; i + 1 < n; ++i) out(i) = (u(i + 1) - u(i - 1)) / (2.0 * h);
  return out;
}

VectorXc d2(const VectorXc& u, double h) {
  const Index n = u.size();
  VectorXc out = VectorXc::Zero(n);
  for (Index i = 1; i + 1 < n; ++i) out(i) = (u(i + 1) - 2.0 * u(i) + u(i - 1)) / (h * h);
  return out;
}

VectorXc apply_resolvent(const ResolventContext& r, const VectorXc& u) {
  const VectorXd re = regularized_apply(r, u.real());
  const VectorXd im = regularized_apply(r, u.imag());
  VectorXc out(u.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

cplx inner(const WkbContext& ctx, const VectorXc& u, const VectorXd& v) {
  const double h = ctx.resolvent.fiber.grid.spacing();
  const Index n = u.size();
  cplx s = 0;
  for (Index i = 1; i + 1 < n; ++i) s += u(i) * v(i);
  return s * h;
}

struct TauData {
  VectorXd tau, bt2, tw, tw2;
};

TauData tau_data(const WkbContext& ctx) {
  const FiberSolution& f = ctx.resolvent.fiber;
  TauData t;
  t.tau = f.grid.nodes;
  const Index n = t.tau.size();
  t.bt2.resize(n);
  for (Index i = 0; i < n; ++i) t.bt2(i) = step_field(f.a, t.tau(i)) * t.tau(i) * t.tau(i);
  t.tw = t.tau.cwiseProduct(ctx.w);
  t.tw2 = t.tw.cwiseProduct(ctx.w);
  return t;
}

// L_1 X = -2 i w Phi' X
VectorXc op_l1(const WkbContext& ctx, const SigmaJet& j, const VectorXc& x) {
  return (-2.0 * I * j.dphi) * ctx.w.cast<cplx>().cwiseProduct(x);
}

// L_2 X = k D X - 2 w (-i dX + (k/2) b tau^2 X) - Phi'^2 X + 2 k tau w^2 X
VectorXc op_l2(const WkbContext& ctx, const TauData& t, const SigmaJet& j, const VectorXc& x,
               const VectorXc& dx) {
  const double h = ctx.resolvent.fiber.grid.spacing();
  VectorXc out = j.k * d1(x, h);
  const VectorXc inner_term = -I * dx + (0.5 * j.k) * t.bt2.cast<cplx>().cwiseProduct(x);
  out -= 2.0 * ctx.w.cast<cplx>().cwiseProduct(inner_term);
  out -= (j.dphi * j.dphi) * x;
  out += (2.0 * j.k) * t.tw2.cast<cplx>().cwiseProduct(x);
  return out;
}

// L_3 X = 2 Phi' dX + Phi'' X + i Phi' k b tau^2 X - 4 i k tau w Phi' X
VectorXc op_l3(const WkbContext& ctx, const TauData& t, const SigmaJet& j, const VectorXc& x,
               const VectorXc& dx) {
  (void)ctx;
  VectorXc out = (2.0 * j.dphi) * dx + j.ddphi * x;
  out += (I * j.dphi * j.k) * t.bt2.cast<cplx>().cwiseProduct(x);
  out -= (4.0 * I * j.k * j.dphi) * t.tw.cast<cplx>().cwiseProduct(x);
  return out;
}

struct Orders {
  VectorXc b0, b1, b2, rhs3;
};

Orders recursion(const WkbContext& ctx, const SigmaJet& j) {
  const TauData t = tau_data(ctx);
  const VectorXc phi = ctx.resolvent.fiber.phi.cast<cplx>();
  const VectorXc rho = ctx.rho.cast<cplx>();
  const double d2c = ctx.delta[2], d3c = ctx.delta[3];
  Orders o;
  o.b0 = j.f0 * phi;
  const VectorXc db0 = j.df0 * phi;
  o.b1 = (2.0 * I * j.dphi * j.f0) * rho;
  const VectorXc db1 = (2.0 * I * (j.ddphi * j.f0 + j.dphi * j.df0)) * rho;
  o.b2 = apply_resolvent(ctx.resolvent,
                         d2c * o.b0 - op_l2(ctx, t, j, o.b0, db0) - op_l1(ctx, j, o.b1));
  o.rhs3 = d3c * o.b0 - op_l3(ctx, t, j, o.b0, db0) + d2c * o.b1 - op_l2(ctx, t, j, o.b1, db1) -
           op_l1(ctx, j, o.b2);
  return o;
}

// Cumulative integral of f from s_r to each sorted node.
VectorXd cumulative_from(const std::function<double(double)>& f, double s_r, const VectorXd& x) {
  const Index n = x.size();
  VectorXd out(n);
  auto piece = [&](double a, double b) {
    const int panels = std::max(1, int(std::ceil(std::abs(b - a) / 0.05)));
    return gauss_legendre(f, a, b, panels);
  };
  Index k = 0;
  while (k < n && x(k) < s_r) ++k;
  double acc = 0, prev = s_r;
  for (Index i = k; i < n; ++i) {
    acc += piece(prev, x(i));
    prev = x(i);
    out(i) = acc;
  }
  acc = 0;
  prev = s_r;
  for (Index i = k - 1; i >= 0; --i) {
    acc += piece(prev, x(i));
    prev = x(i);
    out(i) = acc;
  }
  return out;
}

double interp(const VectorXd& x, const VectorXd& y, double t) {
  const Index n = x.size();
  if (t <= x(0)) return y(0);
  if (t >= x(n - 1)) return y(n - 1);
  const Index i = Index(std::upper_bound(x.data(), x.data() + n, t) - x.data()) - 1;
  const double u = (t - x(i)) / (x(i + 1) - x(i));
  return (1 - u) * y(i) + u * y(i + 1);
}

// Integrand of (ln f)' with the linear start patch.
std::function<double(double)> log_integrand(const TransportInput& in) {
  auto raw = [in](double s) { return (in.g - in.ddphi(s)) / (2.0 * in.dphi(s)); };
  const double r0 = in.start_radius;
  const double lo = raw(in.s_r - r0), hi = raw(in.s_r + r0);
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw Error(ErrorCode::SingularStartFailure, "transport integrand not finite at the start radius");
  return [raw, r0, lo, hi, s_r = in.s_r](double s) {
    const double x = s - s_r;
    if (std::abs(x) < r0) return lo + (hi - lo) * (x + r0) / (2.0 * r0);
    return raw(s);
  };
}

}  // namespace

Grid1D wkb_grid(const WkbConfig& cfg) {
  const Index nn = Index(std::llround(cfg.tau_neg / cfg.spacing));
  const Index np = Index(std::llround(cfg.tau_pos / cfg.spacing));
  Grid1D g;
  g.n_points = nn + np + 1;
  g.tau_min = -double(nn) * cfg.spacing;
  g.tau_max = double(np) * cfg.spacing;
  g.nodes.resize(g.n_points);
  for (Index i = 0; i < g.n_points; ++i) g.nodes(i) = double(i - nn) * cfg.spacing;
  return g;
}

double wkb_dphi(const WkbContext& ctx, double sigma) {
  const double x = sigma - ctx.curve.s_r;
  const double v = ctx.potential.sqrt_value(sigma);
  return x < 0 ? -v : v;
}

double wkb_ddphi(const WkbContext& ctx, double sigma) {
  const double p = wkb_dphi(ctx, sigma);
  if (std::abs(sigma - ctx.curve.s_r) < 1e-7 || p == 0.0) return ctx.potential.g;
  return -ctx.potential.scale * ctx.curve.curvature_d1(sigma) / (2.0 * p);
}

WkbContext make_wkb_context(const EdgeConstants& c, const CurveModel& curve,
                            const FiberConfig& fiber_cfg, const WkbConfig& cfg) {
  WkbContext ctx;
  ctx.constants = c;
  ctx.curve = curve;
  ctx.config = cfg;
  ctx.potential = effective_potential(band_data(c), curve);
  const Grid1D grid = wkb_grid(cfg);
  const FiberSolution fiber = solve_fiber(c.a, c.zeta_a, grid, fiber_cfg.decay_tol);
  ctx.resolvent = make_resolvent_context(fiber, c.mu_pp);
  const Index n = grid.n_points;
  ctx.w.resize(n);
  for (Index i = 0; i < n; ++i) ctx.w(i) = c.zeta_a + step_field(c.a, grid.nodes(i)) * grid.nodes(i);
  ctx.rho = regularized_apply(ctx.resolvent, ctx.w.cwiseProduct(fiber.phi));
  ctx.delta = {c.beta_a, 0.0, c.m3 * curve.k_max, std::sqrt(curve.k2 * c.m3 * c.c2 / 2.0)};
  ctx.phase = phase_coefficients(ctx);

  const double L = curve.half_length;
  const double eta_hat = 0.5 * std::min(0.25, L / 4.0);
  const double lo = curve.s_ell + eta_hat, hi = curve.s_ell + 2.0 * L - eta_hat;
  std::vector<double> s;
  for (int i = 0; i < cfg.profile_nodes; ++i)
    s.push_back(lo + (hi - lo) * double(i) / double(cfg.profile_nodes - 1));
  s.push_back(0.0);
  s.push_back(curve.s_r);
  s.push_back(L);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end(), [](double x, double y) { return std::abs(x - y) < 1e-12; }),
          s.end());
  ctx.profile = transport_profile(ctx, Eigen::Map<VectorXd>(s.data(), Index(s.size())));
  return ctx;
}

cplx solvability_projection(const WkbContext& ctx, const SigmaJet& jet) {
  const Orders o = recursion(ctx, jet);
  return inner(ctx, o.rhs3, ctx.resolvent.fiber.phi);
}

PhaseCoefficients phase_coefficients(const WkbContext& ctx) {
  SigmaJet a;
  a.k = 1.0;
  a.dphi = 1.0;
  SigmaJet b;
  b.k = 0.0;
  b.dphi = 1.0;
  const double ia = solvability_projection(ctx, a).imag();
  const double ib = solvability_projection(ctx, b).imag();
  return {ia - ib, ib};
}

VectorXd compute_F(const WkbContext& ctx, const VectorXd& sigma) {
  VectorXd F(sigma.size());
  for (Index m = 0; m < sigma.size(); ++m) {
    SigmaJet j;
    j.sigma = sigma(m);
    j.k = ctx.curve.curvature(sigma(m));
    j.dphi = wkb_dphi(ctx, sigma(m));
    j.ddphi = wkb_ddphi(ctx, sigma(m));
    F(m) = -solvability_projection(ctx, j).imag();
  }
  return F;
}

void transport_amplitude(const TransportInput& in, const VectorXd& sigma, VectorXd& f_mod,
                         VectorXd& alpha0) {
  const auto lf = log_integrand(in);
  f_mod = in.f_at_well * cumulative_from(lf, in.s_r, sigma).array().exp();
  alpha0 = in.dalpha ? cumulative_from(in.dalpha, in.s_r, sigma) : VectorXd::Zero(sigma.size());
}

namespace {

TransportInput transport_input(const WkbContext& ctx) {
  TransportInput in;
  in.s_r = ctx.curve.s_r;
  in.g = ctx.potential.g;
  in.start_radius = ctx.config.frobenius * ctx.curve.half_length;
  in.f_at_well = std::pow(in.g / M_PI, 0.25);
  in.dphi = [&ctx](double s) { return wkb_dphi(ctx, s); };
  in.ddphi = [&ctx](double s) { return wkb_ddphi(ctx, s); };
  const double mu_pp = ctx.constants.mu_pp;
  const PhaseCoefficients pc = ctx.phase;
  const double o = ctx.config.orientation;
  in.dalpha = [&ctx, pc, mu_pp, o](double s) {
    return o * (ctx.curve.curvature(s) * pc.c_k + ctx.potential.value(s) * pc.c_p) / mu_pp;
  };
  return in;
}

}  // namespace

TransportProfile transport_profile(const WkbContext& ctx, const VectorXd& sigma) {
  TransportProfile p;
  p.sigma = sigma;
  const TransportInput in = transport_input(ctx);
  transport_amplitude(in, sigma, p.f_mod, p.alpha0);
  p.Phi = cumulative_from([&ctx](double s) { return ctx.potential.sqrt_value(s); }, ctx.curve.s_r,
                          sigma)
              .cwiseAbs();
  p.dPhi.resize(sigma.size());
  p.F.resize(sigma.size());
  for (Index m = 0; m < sigma.size(); ++m) {
    const double d = wkb_dphi(ctx, sigma(m));
    p.dPhi(m) = d;
    p.F(m) = -d * (ctx.curve.curvature(sigma(m)) * ctx.phase.c_k + d * d * ctx.phase.c_p);
  }
  p.f_at_well = in.f_at_well;
  const double L = ctx.curve.half_length;
  if (sigma(0) <= 0.0 && sigma(sigma.size() - 1) >= L) {
    p.f_at_0 = interp(sigma, p.f_mod, 0.0);
    p.alpha_a = alpha_constant(sigma, p.alpha0, L);
  }
  return p;
}

double alpha_constant(const VectorXd& sigma, const VectorXd& alpha0, double L) {
  return (interp(sigma, alpha0, 0.0) - interp(sigma, alpha0, L)) / L;
}

SigmaJet sigma_jet(const WkbContext& ctx, double sigma) {
  const VectorXd s = VectorXd::Constant(1, sigma);
  const TransportInput in = transport_input(ctx);
  VectorXd fm, al;
  transport_amplitude(in, s, fm, al);
  SigmaJet j;
  j.sigma = sigma;
  j.k = ctx.curve.curvature(sigma);
  j.dphi = wkb_dphi(ctx, sigma);
  j.ddphi = wkb_ddphi(ctx, sigma);
  j.f0 = fm(0) * std::exp(I * al(0));
  j.df0 = j.f0 * (log_integrand(in)(sigma) + I * in.dalpha(sigma));
  return j;
}

std::vector<VectorXc> wkb_profiles(const WkbContext& ctx, const SigmaJet& jet, int order) {
  if (order < 0 || order > 3)
    throw Error(ErrorCode::OrderNotAvailable, "WKB order " + std::to_string(order));
  const Orders o = recursion(ctx, jet);
  std::vector<VectorXc> b{o.b0, o.b1, o.b2};
  if (order == 3) b.push_back(apply_resolvent(ctx.resolvent, o.rhs3));
  b.resize(order + 1);
  return b;
}

QuasiMode assemble_quasimode(const WkbContext& ctx, double hbar, int order, const VectorXd& sigma) {
  if (order < 0 || order > 3)
    throw Error(ErrorCode::OrderNotAvailable, "WKB order " + std::to_string(order));
  QuasiMode q;
  q.order = order;
  q.hbar = hbar;
  q.sigma = sigma;
  q.tau = ctx.resolvent.fiber.grid;
  q.delta = ctx.delta;
  const TransportInput in = transport_input(ctx);
  VectorXd fm;
  transport_amplitude(in, sigma, fm, q.alpha0);
  q.Phi = cumulative_from([&ctx](double s) { return ctx.potential.sqrt_value(s); }, ctx.curve.s_r,
                          sigma)
              .cwiseAbs();
  q.f0.resize(sigma.size());
  const auto lf = log_integrand(in);
  const Index nt = q.tau.n_points;
  q.b.assign(order + 1, Eigen::MatrixXcd(sigma.size(), nt));
  for (Index m = 0; m < sigma.size(); ++m) {
    SigmaJet j;
    j.sigma = sigma(m);
    j.k = ctx.curve.curvature(sigma(m));
    j.dphi = wkb_dphi(ctx, sigma(m));
    j.ddphi = wkb_ddphi(ctx, sigma(m));
    j.f0 = fm(m) * std::exp(I * q.alpha0(m));
    j.df0 = j.f0 * (lf(sigma(m)) + I * in.dalpha(sigma(m)));
    q.f0(m) = j.f0;
    const auto b = wkb_profiles(ctx, j, order);
    for (int k = 0; k <= order; ++k) q.b[k].row(m) = b[k].transpose();
  }
  return q;
}

double quasimode_norm(const WkbContext& ctx, double hbar) {
  const TransportProfile& p = ctx.profile;
  const double eps = std::sqrt(hbar);
  double s = 0;
  for (Index m = 0; m + 1 < p.sigma.size(); ++m) {
    auto f = [&](Index i) {
      return p.f_mod(i) * p.f_mod(i) * std::exp(-2.0 * p.Phi(i) / eps);
    };
    s += 0.5 * (f(m) + f(m + 1)) * (p.sigma(m + 1) - p.sigma(m));
  }
  return std::pow(hbar, -0.25) * s;
}

ResidualReport residual_norm(const WkbContext& ctx, double hbar, int order) {
  const WkbConfig& cfg = ctx.config;
  const double ds = cfg.dsigma;
  const Index W = Index(std::llround(cfg.window / ds));
  const Index pad = 4;
  const Index ns = 2 * (W + pad) + 1;
  VectorXd sigma(ns);
  for (Index m = 0; m < ns; ++m) sigma(m) = ctx.curve.s_r + double(m - W - pad) * ds;

  const Grid1D& grid = ctx.resolvent.fiber.grid;
  const Index nt = grid.n_points;
  const double h = grid.spacing();
  VectorXd k(ns), p(ns);
  for (Index m = 0; m < ns; ++m) {
    k(m) = ctx.curve.curvature(sigma(m));
    p(m) = wkb_dphi(ctx, sigma(m));
  }
  const double weight_min = 1.0 - hbar * grid.tau_max * k.maxCoeff();
  if (weight_min < cfg.min_weight)
    throw Error(ErrorCode::GridGuardFailure,
                "metric weight " + std::to_string(weight_min) + " below guard on the WKB grid");

  const QuasiMode q = assemble_quasimode(ctx, hbar, order, sigma);
  const double eps = std::sqrt(hbar);
  Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(ns, nt);
  double epow = 1.0;
  double delta = 0.0;
  for (int j = 0; j <= order; ++j) {
    B += epow * q.b[j];
    delta += epow * ctx.delta[j];
    epow *= eps;
  }
  B *= std::pow(hbar, -0.125);

  const TauData t = tau_data(ctx);
  auto weight = [&](Index m) { return (1.0 - hbar * k(m) * t.tau.array()).matrix(); };
  auto dsig = [&](const Eigen::MatrixXcd& X, Index m) -> VectorXc {
    return ((X.row(m - 2) - 8.0 * X.row(m - 1) + 8.0 * X.row(m + 1) - X.row(m + 2)) / (12.0 * ds))
        .transpose();
  };
  // tangential factor -w + i eps Phi' + hbar(-i d_sigma + (k/2) b tau^2)
  auto tangential = [&](const Eigen::MatrixXcd& X, Index m) -> VectorXc {
    const VectorXc x = X.row(m).transpose();
    VectorXc out = -ctx.w.cast<cplx>().cwiseProduct(x) + (I * eps * p(m)) * x;
    out += hbar * (-I * dsig(X, m) + (0.5 * k(m)) * t.bt2.cast<cplx>().cwiseProduct(x));
    return out;
  };
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(ns, nt);
  for (Index m = 2; m + 2 < ns; ++m) {
    const VectorXd a = weight(m);
    Y.row(m) = tangential(B, m).cwiseQuotient(a.cast<cplx>()).transpose();
  }
  ResidualReport rep;
  rep.order = order;
  rep.hbar = hbar;
  rep.sigma = sigma.segment(pad, 2 * W + 1);
  rep.residual.resize(2 * W + 1);
  for (Index m = pad; m < pad + 2 * W + 1; ++m) {
    const VectorXd a = weight(m);
    const VectorXc b = B.row(m).transpose();
    VectorXc nb = -d2(b, h) + (hbar * k(m)) * d1(b, h).cwiseQuotient(a.cast<cplx>());
    nb += tangential(Y, m).cwiseQuotient(a.cast<cplx>());
    VectorXc r = nb - delta * b;
    r(0) = r(nt - 1) = 0;
    rep.residual(m - pad) = std::sqrt(r.squaredNorm() * h);
  }
  rep.sup = rep.residual.maxCoeff();
  return rep;
}

double residual_slope(const WkbContext& ctx, int order, const std::vector<double>& hbars,
                      std::vector<ResidualReport>* reports) {
  std::vector<double> r;
  for (double hb : hbars) {
    ResidualReport rep = residual_norm(ctx, hb, order);
    r.push_back(rep.sup);
    if (reports) reports->push_back(std::move(rep));
  }
  return loglog_slope(hbars, r);
}

}  // namespace magstep
