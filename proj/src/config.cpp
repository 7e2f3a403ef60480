#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "magstep/cli.hpp"

namespace magstep {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

// Reads keys of one object, remembers which were consumed.
class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) invalid(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& v) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      v = j_.at(key).get<T>();
    } catch (const std::exception& e) {
      invalid(where_ + "." + key + ": " + e.what());
    }
  }

  const Json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) invalid("unknown key " + where_ + "." + item.key());
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Json curve_json(const CurveSpec& c) {
  Json j;
  j["kind"] = c.kind;
  j["nodes"] = c.nodes;
  if (c.kind == "ellipse") {
    j["semi_major"] = c.semi_major;
    j["semi_minor"] = c.semi_minor;
  } else if (c.kind == "fourier") {
    j["radius"] = c.radius;
    Json m = Json::object();
    for (const auto& [k, v] : c.cos) m[std::to_string(k)] = v;
    j["cos"] = m;
  } else {
    j["path"] = c.path;
  }
  return j;
}

CurveSpec read_curve(const Json& j, const std::string& where) {
  CurveSpec c;
  Reader r(j, where);
  r.get("kind", c.kind);
  r.get("nodes", c.nodes);
  r.get("semi_major", c.semi_major);
  r.get("semi_minor", c.semi_minor);
  r.get("radius", c.radius);
  r.get("path", c.path);
  if (const Json* m = r.sub("cos")) {
    if (!m->is_object()) invalid(where + ".cos: expected an object");
    for (const auto& item : m->items()) {
      try {
        c.cos[std::stoi(item.key())] = item.value().get<double>();
      } catch (const std::exception&) {
        invalid(where + ".cos: bad entry " + item.key());
      }
    }
  }
  r.finish();
  return c;
}

Json window_json(const ExponentWindow& w, bool with_curve) {
  Json j{{"x_lo", w.x_lo}, {"x_hi", w.x_hi}, {"points", w.points}, {"n", w.n},
         {"rel_tol", w.rel_tol}};
  if (with_curve) j["curve"] = curve_json(w.curve);
  return j;
}

ExponentWindow read_window(const Json& j, const std::string& where, ExponentWindow w,
                           bool with_curve) {
  Reader r(j, where);
  r.get("x_lo", w.x_lo);
  r.get("x_hi", w.x_hi);
  r.get("points", w.points);
  r.get("n", w.n);
  r.get("rel_tol", w.rel_tol);
  if (with_curve)
    if (const Json* c = r.sub("curve")) w.curve = read_curve(*c, r.path("curve"));
  r.finish();
  return w;
}

const char* parity_name(ModeParity p) {
  switch (p) {
    case ModeParity::Even: return "even";
    case ModeParity::Odd: return "odd";
    default: return "all";
  }
}

Json grid_json(const StripGrid& g) {
  return Json{{"n_sigma", g.n_sigma},
              {"n_tau", g.n_tau},
              {"tau_spacing", g.tau_spacing},
              {"tau_half_width", g.tau_half_width},
              {"tau_min_width", g.tau_min_width},
              {"tau_cap", g.tau_cap},
              {"quadrature", g.quadrature},
              {"parity", parity_name(g.parity)}};
}

StripGrid read_grid(const Json& j, const std::string& where, StripGrid g) {
  Reader r(j, where);
  r.get("n_sigma", g.n_sigma);
  r.get("n_tau", g.n_tau);
  r.get("tau_spacing", g.tau_spacing);
  r.get("tau_half_width", g.tau_half_width);
  r.get("tau_min_width", g.tau_min_width);
  r.get("tau_cap", g.tau_cap);
  r.get("quadrature", g.quadrature);
  std::string p = parity_name(g.parity);
  r.get("parity", p);
  if (p == "all") g.parity = ModeParity::All;
  else if (p == "even") g.parity = ModeParity::Even;
  else if (p == "odd") g.parity = ModeParity::Odd;
  else invalid(where + ".parity: expected all, even or odd");
  r.finish();
  return g;
}

Json fiber_json(const FiberConfig& f) {
  return Json{{"half_width", f.half_width}, {"spacing", f.spacing},   {"decay_tol", f.decay_tol},
              {"scan_lo", f.scan_lo},       {"scan_hi", f.scan_hi},   {"scan_step", f.scan_step},
              {"fd_step", f.fd_step}};
}

FiberConfig read_fiber(const Json& j, FiberConfig f) {
  Reader r(j, "fiber");
  r.get("half_width", f.half_width);
  r.get("spacing", f.spacing);
  r.get("decay_tol", f.decay_tol);
  r.get("scan_lo", f.scan_lo);
  r.get("scan_hi", f.scan_hi);
  r.get("scan_step", f.scan_step);
  r.get("fd_step", f.fd_step);
  r.finish();
  return f;
}

Json wkb_json(const WkbConfig& w) {
  return Json{{"tau_neg", w.tau_neg},     {"tau_pos", w.tau_pos},
              {"spacing", w.spacing},     {"min_weight", w.min_weight},
              {"window", w.window},       {"dsigma", w.dsigma},
              {"frobenius", w.frobenius}, {"profile_nodes", w.profile_nodes},
              {"orientation", w.orientation}};
}

WkbConfig read_wkb(const Json& j, WkbConfig w) {
  Reader r(j, "wkb");
  r.get("tau_neg", w.tau_neg);
  r.get("tau_pos", w.tau_pos);
  r.get("spacing", w.spacing);
  r.get("min_weight", w.min_weight);
  r.get("window", w.window);
  r.get("dsigma", w.dsigma);
  r.get("frobenius", w.frobenius);
  r.get("profile_nodes", w.profile_nodes);
  r.get("orientation", w.orientation);
  r.finish();
  return w;
}

Json acceptance_json(const AcceptanceConfig& a) {
  Json j;
  j["a"] = a.a;
  j["theta0_lo"] = a.theta0_lo;
  j["theta0_hi"] = a.theta0_hi;
  j["xi0_tol"] = a.xi0_tol;
  j["degennes_beta_tol"] = a.degennes_beta_tol;
  j["degennes_symmetry_tol"] = a.degennes_symmetry_tol;
  j["a_list"] = a.a_list;
  j["m1_tol"] = a.m1_tol;
  j["m3_tol"] = a.m3_tol;
  j["identity_tol"] = a.identity_tol;
  j["i2_tol"] = a.i2_tol;
  j["stationarity_tol"] = a.stationarity_tol;
  j["exponent"] = window_json(a.exponent, true);
  j["min_rule"] = window_json(a.min_rule, true);
  j["wkb_curve"] = curve_json(a.wkb_curve);
  j["wkb_orders"] = a.wkb_orders;
  j["wkb_hbars"] = a.wkb_hbars;
  j["wkb_slack"] = a.wkb_slack;
  j["curve_2d"] = curve_json(a.curve_2d);
  j["ahk_hbars"] = a.ahk_hbars;
  j["ahk_extra_terms"] = a.ahk_extra_terms;
  j["ahk_beta_tol"] = a.ahk_beta_tol;
  j["ahk_c1_tol"] = a.ahk_c1_tol;
  j["ahk_c2_tol"] = a.ahk_c2_tol;
  j["max_grid_sigma"] = a.max_grid_sigma;
  j["max_grid_tau"] = a.max_grid_tau;
  j["gap_hbars"] = a.gap_hbars;
  j["gap_action_tol"] = a.gap_action_tol;
  j["scan_inv_h_lo"] = a.scan_inv_h_lo;
  j["scan_inv_h_hi"] = a.scan_inv_h_hi;
  j["scan_points"] = a.scan_points;
  j["scan_spacing_tol"] = a.scan_spacing_tol;
  j["oracle_grid"] = grid_json(a.oracle_grid);
  j["oracle_hbar"] = a.oracle_hbar;
  j["oracle_count"] = a.oracle_count;
  j["oracle_tol"] = a.oracle_tol;
  j["runtime_limits"] = a.runtime_limits;
  return j;
}

AcceptanceConfig read_acceptance(const Json& j, AcceptanceConfig a) {
  Reader r(j, "acceptance");
  r.get("a", a.a);
  r.get("theta0_lo", a.theta0_lo);
  r.get("theta0_hi", a.theta0_hi);
  r.get("xi0_tol", a.xi0_tol);
  r.get("degennes_beta_tol", a.degennes_beta_tol);
  r.get("degennes_symmetry_tol", a.degennes_symmetry_tol);
  r.get("a_list", a.a_list);
  r.get("m1_tol", a.m1_tol);
  r.get("m3_tol", a.m3_tol);
  r.get("identity_tol", a.identity_tol);
  r.get("i2_tol", a.i2_tol);
  r.get("stationarity_tol", a.stationarity_tol);
  if (const Json* w = r.sub("exponent")) a.exponent = read_window(*w, "acceptance.exponent", a.exponent, true);
  if (const Json* w = r.sub("min_rule")) a.min_rule = read_window(*w, "acceptance.min_rule", a.min_rule, true);
  if (const Json* c = r.sub("wkb_curve")) a.wkb_curve = read_curve(*c, "acceptance.wkb_curve");
  r.get("wkb_orders", a.wkb_orders);
  r.get("wkb_hbars", a.wkb_hbars);
  r.get("wkb_slack", a.wkb_slack);
  if (const Json* c = r.sub("curve_2d")) a.curve_2d = read_curve(*c, "acceptance.curve_2d");
  r.get("ahk_hbars", a.ahk_hbars);
  r.get("ahk_extra_terms", a.ahk_extra_terms);
  r.get("ahk_beta_tol", a.ahk_beta_tol);
  r.get("ahk_c1_tol", a.ahk_c1_tol);
  r.get("ahk_c2_tol", a.ahk_c2_tol);
  r.get("max_grid_sigma", a.max_grid_sigma);
  r.get("max_grid_tau", a.max_grid_tau);
  r.get("gap_hbars", a.gap_hbars);
  r.get("gap_action_tol", a.gap_action_tol);
  r.get("scan_inv_h_lo", a.scan_inv_h_lo);
  r.get("scan_inv_h_hi", a.scan_inv_h_hi);
  r.get("scan_points", a.scan_points);
  r.get("scan_spacing_tol", a.scan_spacing_tol);
  if (const Json* g = r.sub("oracle_grid")) a.oracle_grid = read_grid(*g, "acceptance.oracle_grid", a.oracle_grid);
  r.get("oracle_hbar", a.oracle_hbar);
  r.get("oracle_count", a.oracle_count);
  r.get("oracle_tol", a.oracle_tol);
  r.get("runtime_limits", a.runtime_limits);
  r.finish();
  return a;
}

void check_curve(const CurveSpec& c, const std::string& where) {
  if (c.nodes < 64) invalid(where + ".nodes must be at least 64");
  if (c.kind == "ellipse") {
    if (!(c.semi_major > 0 && c.semi_minor > 0)) invalid(where + ": semi-axes must be positive");
  } else if (c.kind == "fourier") {
    if (!(c.radius > 0)) invalid(where + ".radius must be positive");
    for (const auto& [m, v] : c.cos)
      if (m < 1 || !std::isfinite(v)) invalid(where + ".cos: modes start at 1");
  } else if (c.kind == "tabulated") {
    if (c.path.empty()) invalid(where + ".path is required for tabulated curves");
  } else {
    invalid(where + ".kind must be ellipse, fourier or tabulated");
  }
}

void check_positive_list(const std::vector<double>& v, const std::string& where) {
  for (double x : v)
    if (!(x > 0) || !std::isfinite(x)) invalid(where + ": entries must be positive");
}

void check_grid(const StripGrid& g, const std::string& where) {
  if (g.n_sigma < 2) invalid(where + ".n_sigma must be at least 2");
  if (g.n_tau < 0 || g.tau_spacing <= 0 || g.tau_half_width < 0)
    invalid(where + ": tau grid parameters out of range");
}

}  // namespace

RunConfig default_config() {
  RunConfig c;
  AcceptanceConfig& a = c.acceptance;
  a.exponent.curve = CurveSpec{};  // ellipse(2, 1)
  a.min_rule.curve.kind = "fourier";
  a.min_rule.curve.radius = 1.0;
  a.min_rule.curve.cos = {{2, -0.1}, {3, 0.02}};
  a.min_rule.x_lo = 6;
  a.min_rule.x_hi = 18;
  a.wkb_curve.semi_major = 4;
  a.wkb_curve.semi_minor = 3;
  a.curve_2d = a.wkb_curve;
  a.oracle_grid.n_sigma = 24;
  a.oracle_grid.n_tau = 32;
  a.oracle_grid.tau_half_width = 8;
  return c;
}

CurveModel make_curve(const CurveSpec& spec) {
  check_curve(spec, "curve");
  CurveOptions opt;
  opt.n_nodes = spec.nodes;
  if (spec.kind == "ellipse") return build_ellipse(spec.semi_major, spec.semi_minor, opt);
  if (spec.kind == "fourier") return build_fourier_curve(spec.radius, spec.cos, opt);
  return build_tabulated(read_curve_csv(spec.path), opt);
}

Json config_to_json(const RunConfig& c) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = c.model;
  j["a"] = c.a;
  j["a_list"] = c.a_list;
  j["curve"] = curve_json(c.curve);
  j["fiber"] = fiber_json(c.fiber);
  j["wkb"] = wkb_json(c.wkb);
  j["alpha"] = c.alpha;
  j["compute_alpha"] = c.compute_alpha;
  j["h_list"] = c.h_list;
  j["effective"] = window_json(c.effective, false);
  j["noise_factor"] = c.noise_factor;
  j["wkb_orders"] = c.wkb_orders;
  j["wkb_hbars"] = c.wkb_hbars;
  j["eta"] = c.eta;
  j["grid"] = grid_json(c.grid);
  j["hbar"] = c.hbar;
  j["eigen_count"] = c.eigen_count;
  j["eigen_tol"] = c.eigen_tol;
  j["single_well"] = c.single_well;
  j["export_coo"] = c.export_coo;
  j["ahk_hbars"] = c.ahk_hbars;
  j["cache_dir"] = c.cache_dir;
  j["acceptance"] = acceptance_json(c.acceptance);
  return j;
}

RunConfig config_from_json(const Json& j) {
  RunConfig c = default_config();
  Reader r(j, "config");
  int version = kSchemaVersion;
  r.get("schema_version", version);
  if (version != kSchemaVersion) invalid("unsupported schema_version " + std::to_string(version));
  r.get("model", c.model);
  r.get("a", c.a);
  r.get("a_list", c.a_list);
  if (const Json* s = r.sub("curve")) c.curve = read_curve(*s, "curve");
  if (const Json* s = r.sub("fiber")) c.fiber = read_fiber(*s, c.fiber);
  if (const Json* s = r.sub("wkb")) c.wkb = read_wkb(*s, c.wkb);
  r.get("alpha", c.alpha);
  r.get("compute_alpha", c.compute_alpha);
  r.get("h_list", c.h_list);
  if (const Json* s = r.sub("effective")) c.effective = read_window(*s, "effective", c.effective, false);
  r.get("noise_factor", c.noise_factor);
  r.get("wkb_orders", c.wkb_orders);
  r.get("wkb_hbars", c.wkb_hbars);
  r.get("eta", c.eta);
  if (const Json* s = r.sub("grid")) c.grid = read_grid(*s, "grid", c.grid);
  r.get("hbar", c.hbar);
  r.get("eigen_count", c.eigen_count);
  r.get("eigen_tol", c.eigen_tol);
  r.get("single_well", c.single_well);
  r.get("export_coo", c.export_coo);
  r.get("ahk_hbars", c.ahk_hbars);
  r.get("cache_dir", c.cache_dir);
  if (const Json* s = r.sub("acceptance")) c.acceptance = read_acceptance(*s, c.acceptance);
  r.finish();
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    invalid(path + ": " + e.what());
  }
  return config_from_json(j);
}

void validate_config(const RunConfig& c) {
  if (c.model != "magnetic-step" && c.model != "neumann" && c.model != "transversal")
    invalid("model must be magnetic-step, neumann or transversal");
  auto check_a = [](double a, const std::string& where) {
    if (!(a >= -1.0 && a < 0.0)) invalid(where + " must lie in [-1, 0)");
  };
  if (c.model != "neumann") check_a(c.a, "a");
  for (double a : c.a_list) check_a(a, "a_list entry");
  for (double a : c.acceptance.a_list) check_a(a, "acceptance.a_list entry");
  check_a(c.acceptance.a, "acceptance.a");
  if (!(c.eta > 0 && c.eta < 0.25)) invalid("eta must lie in (0, 1/4)");
  check_curve(c.curve, "curve");
  check_curve(c.acceptance.exponent.curve, "acceptance.exponent.curve");
  check_curve(c.acceptance.min_rule.curve, "acceptance.min_rule.curve");
  check_curve(c.acceptance.wkb_curve, "acceptance.wkb_curve");
  check_curve(c.acceptance.curve_2d, "acceptance.curve_2d");
  if (!(c.fiber.half_width > 0 && c.fiber.spacing > 0 && c.fiber.spacing < c.fiber.half_width))
    invalid("fiber grid out of range");
  check_positive_list(c.h_list, "h_list");
  check_positive_list(c.wkb_hbars, "wkb_hbars");
  check_positive_list(c.ahk_hbars, "ahk_hbars");
  check_positive_list(c.acceptance.wkb_hbars, "acceptance.wkb_hbars");
  check_positive_list(c.acceptance.ahk_hbars, "acceptance.ahk_hbars");
  check_positive_list(c.acceptance.gap_hbars, "acceptance.gap_hbars");
  for (int n : c.wkb_orders)
    if (n < 0 || n > 3) invalid("wkb_orders entries must lie in 0..3");
  for (int n : c.acceptance.wkb_orders)
    if (n < 0 || n > 3) invalid("acceptance.wkb_orders entries must lie in 0..3");
  for (const ExponentWindow* w : {&c.effective, &c.acceptance.exponent, &c.acceptance.min_rule})
    if (!(w->x_lo > 0 && w->x_hi > w->x_lo && w->points >= 3 && w->n >= 16))
      invalid("exponent window out of range");
  if (!(c.hbar > 0)) invalid("hbar must be positive");
  if (c.eigen_count < 1) invalid("eigen_count must be at least 1");
  check_grid(c.grid, "grid");
  check_grid(c.acceptance.oracle_grid, "acceptance.oracle_grid");
  if (!(c.acceptance.scan_inv_h_hi > c.acceptance.scan_inv_h_lo && c.acceptance.scan_inv_h_lo > 0 &&
        c.acceptance.scan_points >= 3))
    invalid("interference scan range out of range");
  if (c.cache_dir.empty()) invalid("cache_dir must not be empty");
}

std::string canonical_config(const RunConfig& cfg) { return config_to_json(cfg).dump(); }

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string config_hash(const RunConfig& cfg) { return sha256_hex(canonical_config(cfg)); }

}  // namespace magstep
