#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "magstep/cli.hpp"
#include "magstep/effective1d.hpp"
#include "magstep/moments.hpp"
#include "magstep/parallel.hpp"
#include "magstep/tunneling.hpp"

namespace magstep {

namespace {

double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
  Json values = Json::object();
};

Outcome crit_degennes(const RunConfig& cfg) {
  const AcceptanceConfig& t = cfg.acceptance;
  const DeGennesConstants dg = de_gennes_constants(cfg.fiber);
  const double rel_err = std::abs(dg.xi0 + std::sqrt(dg.theta0));
  Outcome o;
  o.values = {{"theta0", dg.theta0}, {"xi0", dg.xi0}, {"xi0_plus_sqrt_theta0", rel_err}};
  o.pass = dg.theta0 > t.theta0_lo && dg.theta0 < t.theta0_hi && rel_err < t.xi0_tol;
  o.detail = "theta0=" + fmt("%.8f", dg.theta0) + " |xi0+sqrt(theta0)|=" + fmt("%.2e", rel_err);
  return o;
}

Outcome crit_symmetric_step(const RunConfig& cfg) {
  const AcceptanceConfig& t = cfg.acceptance;
  const DeGennesConstants dg = de_gennes_constants(cfg.fiber);
  const auto [zeta, beta] = band_minimize(-1.0, cfg.fiber);
  const FiberSolution sol = solve_fiber(-1.0, zeta, cfg.fiber.whole_grid(), cfg.fiber.decay_tol);
  const Eigen::Index n = sol.phi.size();
  const double h = sol.grid.spacing();
  double sym = 0;
  for (Eigen::Index i = 0; i < n; ++i) sym += std::pow(sol.phi(i) - sol.phi(n - 1 - i), 2) * h;
  sym = std::sqrt(sym);
  const double db = std::abs(beta - dg.theta0);
  Outcome o;
  o.values = {{"beta", beta}, {"theta0", dg.theta0}, {"zeta", zeta}, {"xi0", dg.xi0},
              {"beta_error", db}, {"asymmetry", sym}};
  o.pass = db < t.degennes_beta_tol && sym < t.degennes_symmetry_tol;
  o.detail = "|beta-theta0|=" + fmt("%.2e", db) + " asymmetry=" + fmt("%.2e", sym);
  return o;
}

Outcome crit_bounds(const RunConfig& cfg, int jobs) {
  const AcceptanceConfig& t = cfg.acceptance;
  const double theta0 = de_gennes_constants(cfg.fiber).theta0;
  std::vector<EdgeConstants> cs(t.a_list.size());
  parallel_for(cs.size(), jobs,
               [&](size_t i) { cs[i] = make_resolvent_context(t.a_list[i], cfg.fiber).constants; });
  Outcome o;
  o.pass = true;
  Json rows = Json::array();
  std::string bad;
  for (const EdgeConstants& c : cs) {
    const double aa = std::abs(c.a);
    const bool ok = aa * theta0 < c.beta_a && c.beta_a < std::min(aa, theta0) && c.dphi_at_0 < 0 &&
                    c.mu_pp > 0 && c.m3 < 0;
    if (!ok) bad += " a=" + fmt("%g", c.a);
    o.pass = o.pass && ok;
    rows.push_back({{"a", c.a}, {"beta", c.beta_a}, {"lower", aa * theta0},
                    {"upper", std::min(aa, theta0)}, {"dphi_at_0", c.dphi_at_0},
                    {"mu_pp", c.mu_pp}, {"m3", c.m3}, {"ok", ok}});
  }
  o.values["rows"] = rows;
  o.detail = o.pass ? std::to_string(cs.size()) + " field ratios inside all bounds"
                    : "bounds violated at" + bad;
  return o;
}

Outcome crit_identities(const RunConfig& cfg, int jobs) {
  const AcceptanceConfig& t = cfg.acceptance;
  FiberConfig coarse = cfg.fiber;
  coarse.spacing *= 2.0;
  std::vector<MomentReport> reps(t.a_list.size());
  parallel_for(reps.size(), jobs, [&](size_t i) {
    const double a = t.a_list[i];
    reps[i] = richardson(identity_suite(make_resolvent_context(a, cfg.fiber)),
                         identity_suite(make_resolvent_context(a, coarse)));
  });
  const std::map<std::string, double> tol{
      {"m1", t.m1_tol},          {"m3_closed_form", t.m3_tol},  {"m2_closed_form", t.identity_tol},
      {"tau_u", t.identity_tol}, {"tau_u2", t.identity_tol},    {"b_tau2_u", t.identity_tol},
      {"tau_phi2", t.identity_tol}, {"tau_dphi2", t.identity_tol}, {"i2", t.i2_tol},
      {"stationarity", t.stationarity_tol}};
  Outcome o;
  o.pass = true;
  std::map<std::string, double> worst;
  Json rows = Json::array();
  for (const MomentReport& r : reps) {
    rows.push_back({{"a", r.a}, {"residuals", r.identity_residuals}});
    for (const auto& [k, lim] : tol) {
      const double v = std::abs(r.identity_residuals.at(k));
      worst[k] = std::max(worst[k], v);
      if (!(v < lim)) o.pass = false;
    }
  }
  o.values["rows"] = rows;
  o.values["worst"] = worst;
  std::string d;
  for (const auto& [k, v] : worst)
    if (!(v < tol.at(k))) d += " " + k + "=" + fmt("%.2e", v);
  o.detail = o.pass ? "max M1 " + fmt("%.1e", worst["m1"]) + ", max I2 " + fmt("%.1e", worst["i2"]) +
                          ", others <= " + fmt("%.1e", worst["tau_dphi2"])
                    : "over tolerance:" + d;
  return o;
}

Outcome exponent_check(const RunConfig& cfg, const ExponentWindow& w, int jobs, bool min_rule) {
  const EdgeConstants c = edge_constants(cfg.acceptance.a, cfg.fiber);
  const CurveModel curve = make_curve(w.curve);
  const EffectivePotential v = effective_potential(band_data(c), curve);
  const AgmonData ag = agmon(v);
  GapFitOptions go;
  go.n = w.n;
  go.max_exponent = std::max(go.max_exponent, 1.01 * w.x_hi);
  go.noise_factor = cfg.noise_factor;
  go.jobs = jobs;
  const GapFit fit = gap_exponent_fit(v, exponent_window_sweep(ag.S, w.x_lo, w.x_hi, w.points), go);
  const double s_min = std::min(ag.S_u, ag.S_d), s_max = std::max(ag.S_u, ag.S_d);
  Outcome o;
  o.values = {{"S_fit", fit.S_fit}, {"S", ag.S}, {"S_u", ag.S_u}, {"S_d", ag.S_d}, {"rms", fit.rms}};
  const double e = rel(fit.S_fit, min_rule ? s_min : ag.S);
  o.values["relative_error"] = e;
  if (min_rule) {
    const bool nearer = std::abs(fit.S_fit - s_min) < std::abs(fit.S_fit - s_max);
    o.pass = e < w.rel_tol && nearer;
    o.detail = "S_fit=" + fmt("%.5f", fit.S_fit) + " min(S_u,S_d)=" + fmt("%.5f", s_min) + " (" +
               fmt("%+.2f%%", 100 * (fit.S_fit - s_min) / s_min) + "), other path " +
               fmt("%.5f", s_max);
  } else {
    o.pass = e < w.rel_tol;
    o.detail = "S_fit=" + fmt("%.5f", fit.S_fit) + " S=" + fmt("%.5f", ag.S) + " (" +
               fmt("%+.2f%%", 100 * (fit.S_fit - ag.S) / ag.S) + ")";
  }
  return o;
}

Outcome crit_wkb(const RunConfig& cfg, int jobs) {
  const AcceptanceConfig& t = cfg.acceptance;
  const EdgeConstants c = edge_constants(t.a, cfg.fiber);
  const WkbContext ctx = make_wkb_context(c, make_curve(t.wkb_curve), cfg.fiber, cfg.wkb);
  std::vector<double> slopes(t.wkb_orders.size());
  parallel_for(slopes.size(), jobs,
               [&](size_t i) { slopes[i] = residual_slope(ctx, t.wkb_orders[i], t.wkb_hbars); });
  Outcome o;
  o.pass = true;
  Json rows = Json::array();
  for (size_t i = 0; i < slopes.size(); ++i) {
    const int N = t.wkb_orders[i];
    const double need = 0.5 * (N + 1) - t.wkb_slack;
    o.pass = o.pass && slopes[i] >= need;
    rows.push_back({{"order", N}, {"slope", slopes[i]}, {"threshold", need}});
    o.detail += (i ? " " : "") + std::string("N=") + std::to_string(N) + ":" + fmt("%.2f", slopes[i]) +
                ">=" + fmt("%.2f", need);
  }
  o.values["slopes"] = rows;
  return o;
}

Outcome crit_ahk(const RunConfig& cfg, int jobs) {
  const AcceptanceConfig& t = cfg.acceptance;
  const EdgeConstants c = edge_constants(t.a, cfg.fiber);
  const CurveModel curve = make_curve(t.curve_2d);
  double smallest = t.ahk_hbars.front();
  for (double x : t.ahk_hbars) smallest = std::min(smallest, x);
  const WeightedOperator2D probe =
      assemble_single_well(c, curve, WellSide::Right, smallest, cfg.eta, cfg.grid);
  const AhkFit f = ahk_coefficient_fit(c, curve, t.ahk_hbars, cfg.eta, cfg.grid, t.ahk_extra_terms, jobs);
  const double eb = rel(f.beta_fit, f.beta), e1 = rel(f.c1_fit, f.c1), e2 = rel(f.c2_fit, f.c2);
  const bool grid_ok = probe.n_sigma() <= t.max_grid_sigma && probe.n_tau() <= t.max_grid_tau;
  Outcome o;
  o.pass = grid_ok && eb < t.ahk_beta_tol && e1 < t.ahk_c1_tol && e2 < t.ahk_c2_tol;
  o.values = {{"beta_fit", f.beta_fit}, {"c1_fit", f.c1_fit}, {"c2_fit", f.c2_fit}, {"beta", f.beta},
              {"c1", f.c1},             {"c2", f.c2},         {"three_term", f.three_term},
              {"extra", f.extra},       {"grid", {probe.n_sigma(), probe.n_tau()}}};
  o.detail = "beta " + fmt("%+.3f%%", 100 * (f.beta_fit - f.beta) / f.beta) + ", c1 " +
             fmt("%+.2f%%", 100 * (f.c1_fit - f.c1) / std::abs(f.c1)) + ", c2 " +
             fmt("%+.1f%%", 100 * (f.c2_fit - f.c2) / std::abs(f.c2)) + " on " +
             std::to_string(probe.n_sigma()) + "x" + std::to_string(probe.n_tau());
  return o;
}

Outcome crit_gap2d(const RunConfig& cfg, int jobs) {
  const AcceptanceConfig& t = cfg.acceptance;
  const EdgeConstants c = edge_constants(t.a, cfg.fiber);
  const CurveModel curve = make_curve(t.curve_2d);
  const AgmonData ag = agmon(effective_potential(band_data(c), curve));
  const ExponentFit2D fit = gap_exponent_fit_2d(c, curve, t.gap_hbars, cfg.eta, cfg.grid, jobs);
  const InterferenceScan scan =
      interference_scan(c, curve, 1.0 / std::sqrt(t.scan_inv_h_hi), 1.0 / std::sqrt(t.scan_inv_h_lo),
                        t.scan_points, cfg.eta, cfg.grid, jobs);
  const double es = rel(fit.S_fit, ag.S);
  const bool have_zeros = scan.zeros_inv_h.size() >= 2;
  const double ep = have_zeros ? rel(scan.spacing, scan.expected) : INFINITY;
  Outcome o;
  o.pass = es < t.gap_action_tol && have_zeros && ep < t.scan_spacing_tol;
  o.values = {{"S_fit", fit.S_fit}, {"S", ag.S},           {"rms", fit.rms},
              {"zeros_inv_h", scan.zeros_inv_h},           {"spacing", scan.spacing},
              {"expected_spacing", scan.expected}};
  o.detail = "S_fit=" + fmt("%.4f", fit.S_fit) + " S=" + fmt("%.4f", ag.S) + " (" +
             fmt("%+.1f%%", 100 * (fit.S_fit - ag.S) / ag.S) + "), " +
             std::to_string(scan.zeros_inv_h.size()) + " zeros, spacing " + fmt("%.5f", scan.spacing) +
             " vs " + fmt("%.5f", scan.expected);
  return o;
}

Outcome crit_oracle(const RunConfig& cfg) {
  const AcceptanceConfig& t = cfg.acceptance;
  const EdgeConstants c = edge_constants(t.a, cfg.fiber);
  const CurveModel curve = make_curve(t.curve_2d);
  const WeightedOperator2D op = assemble_full(c, curve, t.oracle_hbar, cfg.eta, t.oracle_grid);
  const EigenResult it = lowest_eigs(op, t.oracle_count);
  const Eigen::VectorXd dense = dense_eigs(op, t.oracle_count);
  const double diff = (it.values - dense).cwiseAbs().maxCoeff();
  Outcome o;
  o.pass = diff < t.oracle_tol;
  o.values = {{"max_difference", diff},
              {"grid", {op.n_sigma(), op.n_tau()}},
              {"lowest", it.values(0)},
              {"iterations", it.iterations}};
  o.detail = "max |lanczos - dense| = " + fmt("%.2e", diff) + " over " +
             std::to_string(t.oracle_count) + " levels, " + std::to_string(op.n_sigma()) + "x" +
             std::to_string(op.n_tau());
  return o;
}

}  // namespace

bool AcceptanceReport::all_pass() const {
  for (const auto& c : criteria)
    if (!c.skipped && !c.pass) return false;
  return true;
}

std::string format_criterion(const CriterionResult& r) {
  std::ostringstream os;
  os << "criterion " << r.id << " " << (r.skipped ? "SKIP" : r.pass ? "PASS" : "FAIL") << " "
     << r.name;
  if (!r.skipped) os << " [" << fmt("%.1f", r.seconds) << " s, limit " << fmt("%g", r.runtime_limit) << " s]";
  if (!r.detail.empty()) os << " : " << r.detail;
  return os.str();
}

AcceptanceReport run_acceptance(const RunConfig& cfg, const RunOptions& opt,
                                const std::vector<int>& only, const CriterionSink& sink) {
  using Fn = std::function<Outcome()>;
  const int jobs = opt.jobs;
  const std::vector<std::pair<std::string, Fn>> table{
      {"de Gennes constants", [&] { return crit_degennes(cfg); }},
      {"a = -1 correspondence", [&] { return crit_symmetric_step(cfg); }},
      {"edge constant bounds", [&] { return crit_bounds(cfg, jobs); }},
      {"moment identity suite", [&] { return crit_identities(cfg, jobs); }},
      {"effective Agmon exponent", [&] { return exponent_check(cfg, cfg.acceptance.exponent, jobs, false); }},
      {"min rule", [&] { return exponent_check(cfg, cfg.acceptance.min_rule, jobs, true); }},
      {"WKB residual orders", [&] { return crit_wkb(cfg, jobs); }},
      {"single-well 2D coefficients", [&] { return crit_ahk(cfg, jobs); }},
      {"double-well 2D gap", [&] { return crit_gap2d(cfg, jobs); }},
      {"oracle equivalence", [&] { return crit_oracle(cfg); }},
  };
  AcceptanceReport rep;
  for (size_t i = 0; i < table.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    CriterionResult r;
    r.id = id;
    r.name = table[i].first;
    r.runtime_limit = cfg.acceptance.runtime_limits[i];
    if (id == 9 && opt.skip_2d) {
      r.skipped = true;
      r.detail = "excluded by --skip-2d";
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        Outcome o = table[i].second();
        r.pass = o.pass;
        r.detail = o.detail;
        r.values = o.values;
      } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("error: ") + e.what();
      }
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (r.seconds > r.runtime_limit) {
        r.pass = false;
        r.detail += " (runtime over limit)";
      }
    }
    rep.criteria.push_back(r);
    if (sink) sink(r);
  }
  return rep;
}

}  // namespace magstep
