#include "magstep/tunneling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "magstep/quadrature.hpp"

namespace magstep {

namespace {

constexpr double kPi = 3.141592653589793238462643;

void check_quadrature(double value, double err, double rel_tol, const char* what) {
  if (err > rel_tol * std::max(1.0, std::abs(value)))
    throw Error(ErrorCode::QuadratureNotConverged,
                std::string(what) + " quadrature not converged (difference " + std::to_string(err) + ")");
}

}  // namespace

BandData band_data(const EdgeConstants& c) {
  return {Provenance::MagneticStep, c.zeta_a, c.beta_a, c.mu_pp, -c.m3};
}

BandData band_data(const DeGennesConstants& c) {
  return {Provenance::Neumann, c.xi0, c.theta0, c.mu_pp, c.c1};
}

double EffectivePotential::value(double s) const {
  return scale * (curve.k_max - curve.curvature(s));
}

double EffectivePotential::sqrt_value(double s) const { return std::sqrt(std::max(0.0, value(s))); }

EffectivePotential effective_potential(const BandData& band, const CurveModel& curve) {
  if (!(band.mu_pp > 0)) throw Error(ErrorCode::DegenerateConstants, "band curvature must be positive");
  if (std::abs(band.weight) < 1e-8)
    throw Error(ErrorCode::DegenerateConstants, "effective potential vanishes identically");
  EffectivePotential v;
  v.curve = curve;
  v.band = band;
  v.scale = 2.0 * band.weight / band.mu_pp;
  v.samples.resize(curve.k_samples.size());
  for (Eigen::Index j = 0; j < v.samples.size(); ++j)
    v.samples(j) = v.scale * (curve.k_max - curve.k_samples(j));
  const double vmax = v.samples.cwiseAbs().maxCoeff();
  if (v.samples.minCoeff() < -1e-10 * std::max(1.0, vmax))
    throw Error(ErrorCode::NegativePotential, "effective potential is negative somewhere");
  v.g = std::sqrt(v.scale * (-curve.k2) / 2.0);
  // least-squares parabola through 5 samples around each well
  const double d = 2e-3;
  double fit = 0;
  for (double w : {curve.s_r, curve.s_ell}) {
    double c2 = 0;
    for (int j = -2; j <= 2; ++j) c2 += (j * j - 2.0) * v.value(w + j * d);
    fit += 0.5 * c2 / 14.0 / (d * d);
  }
  v.g_fit = std::sqrt(std::max(0.0, fit));
  return v;
}

double log_path_prefactor(const std::function<double(double)>& sqrt_v, double g, double T,
                          const QuadratureOptions& q, double* err) {
  // int_0^T ((sqrt V)' - g)/sqrt V = log(sqrt V(T) / (g T)) + int_0^T (1/t - g/sqrt V)
  auto rem = [&](double t) { return 1.0 / t - g / sqrt_v(t); };
  double e = 0;
  const double r = gauss_legendre_checked(rem, 0.0, T, q.panels, e);
  if (err) *err = e;
  return -(std::log(sqrt_v(T) / (g * T)) + r);
}

AgmonData agmon(const EffectivePotential& v, const QuadratureOptions& q) {
  const CurveModel& c = v.curve;
  const double L = c.half_length;
  AgmonData ag;
  auto sv = [&](double s) { return v.sqrt_value(s); };
  double e1 = 0, e2 = 0, e3 = 0, e4 = 0;
  ag.S_u = gauss_legendre_checked(sv, c.s_ell, c.s_r, q.panels, e1);
  ag.S_d = gauss_legendre_checked(sv, c.s_r, c.s_ell + 2.0 * L, q.panels, e2);
  check_quadrature(ag.S_u, e1, q.rel_tol, "S_u");
  check_quadrature(ag.S_d, e2, q.rel_tol, "S_d");
  ag.S = std::min(ag.S_u, ag.S_d);
  const double log_au = log_path_prefactor([&](double t) { return sv(c.s_r - t); }, v.g, c.s_r, q, &e3);
  const double log_ad =
      log_path_prefactor([&](double t) { return sv(c.s_ell - t); }, v.g, L + c.s_ell, q, &e4);
  check_quadrature(log_au, e3, q.rel_tol, "A_u");
  check_quadrature(log_ad, e4, q.rel_tol, "A_d");
  ag.A_u = std::exp(log_au);
  ag.A_d = std::exp(log_ad);
  ag.V0 = v.value(0.0);
  ag.VL = v.value(L);
  ag.quad_error = std::max({e1 / std::max(1.0, ag.S_u), e2 / std::max(1.0, ag.S_d),
                            e3 / std::max(1.0, std::abs(log_au)), e4 / std::max(1.0, std::abs(log_ad))});

  // cumulative int sqrt V from s_ell, increasing s, over one period
  const Eigen::Index n = c.s_nodes.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto wrapped = [&](double s) {
    double x = std::fmod(s - c.s_ell, 2.0 * L);
    return x < 0 ? x + 2.0 * L : x;
  };
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return wrapped(c.s_nodes(a)) < wrapped(c.s_nodes(b)); });
  Eigen::VectorXd cum(n);
  double acc = 0, prev = 0;
  for (Eigen::Index idx : order) {
    const double w = wrapped(c.s_nodes(idx));
    acc += gauss_legendre([&](double x) { return sv(c.s_ell + x); }, prev, w, 1);
    cum(idx) = acc;
    prev = w;
  }
  const double total = ag.S_u + ag.S_d;
  const double at_r = ag.S_u;
  ag.phi_r.resize(n);
  ag.phi_ell.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    ag.phi_r(j) = std::abs(cum(j) - at_r);
    // cut at s_r for the left profile
    ag.phi_ell(j) = (wrapped(c.s_nodes(j)) <= wrapped(c.s_r)) ? cum(j) : total - cum(j);
  }
  return ag;
}

TunnelingPrediction splitting_predict(const EffectivePotential& v, const AgmonData& ag, double gamma0,
                                      double alpha, double h) {
  TunnelingPrediction p;
  p.h = h;
  p.gamma0 = gamma0;
  p.zeta = v.band.zeta;
  p.alpha = alpha;
  p.f = gamma0 / h + v.band.zeta / std::sqrt(h) - alpha;
  const double h14 = std::pow(h, 0.25);
  p.component_u = ag.A_u * std::sqrt(ag.V0) * std::exp(-ag.S_u / h14);
  p.component_d = ag.A_d * std::sqrt(ag.VL) * std::exp(-ag.S_d / h14);
  p.prefactor = v.band.mu_pp * std::pow(h, 13.0 / 8.0) / std::sqrt(kPi) * std::sqrt(v.g);
  const double L = v.curve.half_length;
  p.w_tilde = p.prefactor * (p.component_u * std::polar(1.0, L * p.f) +
                             p.component_d * std::polar(1.0, -L * p.f));
  p.gap_predicted = 2.0 * std::abs(p.w_tilde);
  p.S_u = ag.S_u;
  p.S_d = ag.S_d;
  p.A_u = ag.A_u;
  p.A_d = ag.A_d;
  p.g = v.g;
  return p;
}

TunnelingPrediction splitting_predict(const EdgeConstants& c, const CurveModel& curve, double alpha,
                                      double h) {
  const EffectivePotential v = effective_potential(band_data(c), curve);
  return splitting_predict(v, agmon(v), circulation(curve), alpha, h);
}

TunnelingPrediction splitting_predict_neumann(const DeGennesConstants& c, const CurveModel& curve,
                                              double h, double alpha) {
  const EffectivePotential v = effective_potential(band_data(c), curve);
  return splitting_predict(v, agmon(v), circulation(curve), alpha, h);
}

ArcSpec arc_from_curve(const CurveModel& curve) {
  ArcSpec a;
  a.curvature = [curve](double s) { return curve.curvature(s); };
  a.s_r = curve.s_r;
  return a;
}

TransversalResult splitting_predict_transversal(const ArcSpec& arc, const BandData& band, double h,
                                                const QuadratureOptions& q) {
  const double sr = arc.s_r;
  if (!(sr > 0)) throw Error(ErrorCode::ConfigInvalid, "arc half-width must be positive");
  const auto& k = arc.curvature;
  const double kmax = k(sr);
  double kmin = kmax, asym = 0;
  for (int j = 0; j <= 1000; ++j) {
    const double s = sr * j / 1000.0;
    kmin = std::min(kmin, k(s));
    asym = std::max(asym, std::abs(k(s) - k(-s)));
  }
  if (kmax - kmin < 1e-10) throw Error(ErrorCode::DegenerateCurvature, "curvature is constant on the arc");
  if (asym > arc.symmetry_tol * std::max(1.0, std::abs(kmax)))
    throw Error(ErrorCode::SymmetryViolation, "arc curvature is not even");
  const double d = 1e-3;
  const double k2a = (k(sr + d) - 2 * kmax + k(sr - d)) / (d * d);
  const double k2b = (k(sr + 2 * d) - 2 * kmax + k(sr - 2 * d)) / (4 * d * d);
  const double k2 = (4 * k2a - k2b) / 3;
  if (!(k2 < 0)) throw Error(ErrorCode::WellValidationFailed, "arc maximum is degenerate");
  if (std::abs(k(sr + d) - k(sr - d)) / (2 * d) > 1e-5 * std::max(1.0, std::abs(k2)))
    throw Error(ErrorCode::WellValidationFailed, "arc endpoints are not curvature maxima");
  if (!(band.mu_pp > 0) || std::abs(band.weight) < 1e-8)
    throw Error(ErrorCode::DegenerateConstants, "effective potential vanishes identically");
  const double scale = 2.0 * band.weight / band.mu_pp;
  auto sv = [&](double s) { return std::sqrt(std::max(0.0, scale * (kmax - k(s)))); };
  TransversalResult r;
  r.g = std::sqrt(scale * (-k2) / 2.0);
  double e1 = 0, e2 = 0;
  r.S = gauss_legendre_checked(sv, -sr, sr, q.panels, e1);
  check_quadrature(r.S, e1, q.rel_tol, "S");
  const double log_half = log_path_prefactor([&](double t) { return sv(-sr + t); }, r.g, sr, q, &e2);
  check_quadrature(log_half, e2, q.rel_tol, "A");
  r.A = 2.0 * std::exp(log_half);
  r.V0 = scale * (kmax - k(0.0));
  const double w = 2.0 * band.mu_pp * std::pow(h, 13.0 / 8.0) / std::sqrt(kPi) * std::sqrt(r.g) * r.A *
                   std::sqrt(r.V0) * std::exp(-r.S / std::pow(h, 0.25));
  r.gap = 2.0 * std::abs(w);
  return r;
}

}  // namespace magstep
