#include "magstep/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>
#include <unsupported/Eigen/FFT>

namespace magstep {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;
constexpr int kPanels = 4096;

// 5-point Gauss-Legendre on [-1, 1]
constexpr double kGlx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                            0.9061798459386640};
constexpr double kGlw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                            0.4786286704993665, 0.2369268850561891};

double speed(const CurveJet& j) { return std::hypot(j[2], j[3]); }

double jet_curvature(const CurveJet& j) {
  const double sp = speed(j);
  return (j[2] * j[5] - j[3] * j[4]) / (sp * sp * sp);
}

// dk/dt
double jet_curvature_dt(const CurveJet& j) {
  const double s2 = j[2] * j[2] + j[3] * j[3];
  const double cross = j[2] * j[5] - j[3] * j[4];
  const double cross_t = j[2] * j[7] - j[3] * j[6];
  const double dot = j[2] * j[4] + j[3] * j[5];
  return (cross_t * s2 - 3.0 * cross * dot) / std::pow(s2, 2.5);
}

double gl_speed(const ParametricCurve& c, double a, double b) {
  const double m = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0;
  for (int i = 0; i < 5; ++i) s += kGlw[i] * speed(c(m + h * kGlx[i]));
  return s * h;
}

double wrap(double x, double period) {
  x = std::fmod(x, period);
  if (x < 0) x += period;
  return x;
}

double wrap_centered(double s, double half) {
  double x = wrap(s + half, 2.0 * half) - half;
  if (x >= half) x -= 2.0 * half;
  return x;
}

}  // namespace

std::string curve_kind_name(CurveKind k) {
  switch (k) {
    case CurveKind::Ellipse: return "ellipse";
    case CurveKind::Fourier: return "fourier";
    case CurveKind::Tabulated: return "tabulated";
    case CurveKind::Custom: return "custom";
  }
  return "custom";
}

double CurveModel::raw_arclength(double t) const {
  t = wrap(t, kTwoPi);
  const double dt = kTwoPi / kPanels;
  int i = std::min(int(t / dt), kPanels - 1);
  return panel_s[i] + gl_speed(curve, i * dt, t);
}

double CurveModel::param_at(double s) const {
  const double total = 2.0 * half_length;
  const double target = wrap(wrap_centered(s, half_length) + raw_arclength(t_origin), total);
  const auto it = std::upper_bound(panel_s.begin(), panel_s.end(), target);
  int i = std::clamp(int(it - panel_s.begin()) - 1, 0, kPanels - 1);
  const double dt = kTwoPi / kPanels;
  double lo = i * dt, hi = (i + 1) * dt;
  double t = lo + (target - panel_s[i]) / (panel_s[i + 1] - panel_s[i]) * dt;
  for (int it2 = 0; it2 < 30; ++it2) {
    const double f = panel_s[i] + gl_speed(curve, lo, t) - target;
    const double step = f / speed(curve(t));
    t = std::clamp(t - step, lo, hi);
    if (std::abs(step) < 1e-15) break;
  }
  return t;
}

double CurveModel::curvature(double s) const { return jet_curvature(curve(param_at(s))); }

double CurveModel::curvature_d1(double s) const {
  const CurveJet j = curve(param_at(s));
  return jet_curvature_dt(j) / speed(j);
}

double CurveModel::curvature_d2(double s) const {
  const double h = 2e-3;
  const double d1 = (curvature_d1(s + h) - curvature_d1(s - h)) / (2.0 * h);
  const double d2 = (curvature_d1(s + 0.5 * h) - curvature_d1(s - 0.5 * h)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

std::array<double, 2> CurveModel::point(double s) const {
  const CurveJet j = curve(param_at(s));
  return {j[0], j[1]};
}

ParametricCurve ellipse_curve(double A, double B) {
  return [A, B](double t) -> CurveJet {
    const double c = std::cos(t), s = std::sin(t);
    return {A * c, B * s, -A * s, B * c, -A * c, -B * s, A * s, -B * c};
  };
}

ParametricCurve fourier_curve(double R, const std::map<int, double>& coeffs) {
  return [R, coeffs](double t) -> CurveJet {
    double r = 1, r1 = 0, r2 = 0, r3 = 0;
    for (const auto& [m, c] : coeffs) {
      const double cm = std::cos(m * t), sm = std::sin(m * t);
      r += c * cm;
      r1 -= m * c * sm;
      r2 -= m * m * c * cm;
      r3 += double(m) * m * m * c * sm;
    }
    r *= R; r1 *= R; r2 *= R; r3 *= R;
    const double c = std::cos(t), s = std::sin(t);
    return {r * c,
            r * s,
            r1 * c - r * s,
            r1 * s + r * c,
            r2 * c - 2 * r1 * s - r * c,
            r2 * s + 2 * r1 * c - r * s,
            r3 * c - 3 * r2 * s - 3 * r1 * c + r * s,
            r3 * s + 3 * r2 * c - 3 * r1 * s - r * c};
  };
}

ParametricCurve rigid_motion(ParametricCurve c, double angle, double dx, double dy) {
  const double ca = std::cos(angle), sa = std::sin(angle);
  return [c = std::move(c), ca, sa, dx, dy](double t) {
    CurveJet j = c(t), o;
    for (int k = 0; k < 4; ++k) {
      o[2 * k] = ca * j[2 * k] - sa * j[2 * k + 1];
      o[2 * k + 1] = sa * j[2 * k] + ca * j[2 * k + 1];
    }
    o[0] += dx;
    o[1] += dy;
    return o;
  };
}

WellInfo validate_double_well(const CurveModel& cm) {
  const Eigen::Index n = cm.k_samples.size();
  const double kmax_s = cm.k_samples.maxCoeff(), kmin_s = cm.k_samples.minCoeff();
  if (kmax_s - kmin_s < 1e-10)
    throw Error(ErrorCode::WellValidationFailed, "curvature is constant (degenerate)");
  const double h = cm.s_nodes.size() > 1 ? cm.s_nodes(1) - cm.s_nodes(0) : 1.0;
  std::vector<std::pair<double, double>> maxima;  // (s, k)
  for (Eigen::Index j = 0; j < n; ++j) {
    const double km = cm.k_samples((j + n - 1) % n), k0 = cm.k_samples(j),
                 kp = cm.k_samples((j + 1) % n);
    if (!(k0 >= km && k0 > kp)) continue;
    double s = cm.s_nodes(j);
    for (int it = 0; it < 50; ++it) {
      const double d2 = cm.curvature_d2(s);
      if (!(d2 < 0)) break;
      const double step = std::clamp(cm.curvature_d1(s) / d2, -h, h);
      s -= step;
      if (std::abs(step) < 1e-13) break;
    }
    maxima.emplace_back(s, cm.curvature(s));
  }
  double kmax = -1e300;
  for (auto& m : maxima) kmax = std::max(kmax, m.second);
  std::vector<double> wells;
  for (auto& m : maxima)
    if (m.second > kmax - 1e-7 * std::max(1.0, std::abs(kmax))) wells.push_back(m.first);
  // merge duplicates that refined to the same point
  std::sort(wells.begin(), wells.end());
  wells.erase(std::unique(wells.begin(), wells.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-6; }),
              wells.end());
  if (wells.size() != 2)
    throw Error(ErrorCode::WellValidationFailed,
                "expected two curvature maxima, found " + std::to_string(wells.size()));
  WellInfo w;
  w.s_ell = wells[0];
  w.s_r = wells[1];
  w.k_max = kmax;
  w.k2 = cm.curvature_d2(w.s_r);
  const double k2l = cm.curvature_d2(w.s_ell);
  if (!(w.k2 < 0) || std::abs(w.k2) < 1e-8)
    throw Error(ErrorCode::WellValidationFailed, "degenerate maximum (k'' >= 0)");
  if (std::abs(w.k2 - k2l) > 1e-5 * std::max(1.0, std::abs(w.k2)))
    throw Error(ErrorCode::WellValidationFailed, "unequal k'' at the two wells");
  return w;
}

CurveModel build_curve(CurveKind kind, std::map<std::string, double> params, ParametricCurve c,
                       const CurveOptions& opt) {
  CurveModel cm;
  cm.kind = kind;
  cm.params = std::move(params);
  // orientation: counterclockwise
  {
    double a = 0;
    const int m = 8192;
    for (int i = 0; i < m; ++i) {
      const CurveJet j = c(kTwoPi * i / m);
      a += 0.5 * (j[0] * j[3] - j[1] * j[2]);
    }
    if (a < 0) {
      c = [c](double t) {
        CurveJet j = c(-t);
        j[2] = -j[2]; j[3] = -j[3];
        j[6] = -j[6]; j[7] = -j[7];
        return j;
      };
    }
  }
  cm.curve = c;
  cm.panel_s.assign(kPanels + 1, 0.0);
  const double dt = kTwoPi / kPanels;
  for (int i = 0; i < kPanels; ++i) cm.panel_s[i + 1] = cm.panel_s[i] + gl_speed(c, i * dt, (i + 1) * dt);
  cm.half_length = 0.5 * cm.panel_s[kPanels];
  {
    double a = 0;
    const int m = 16384;
    for (int i = 0; i < m; ++i) {
      const CurveJet j = c(kTwoPi * i / m);
      a += 0.5 * (j[0] * j[3] - j[1] * j[2]);
    }
    cm.area = a * kTwoPi / m;
  }
  const CurveJet start = c(0.0), end = c(kTwoPi);
  if (std::hypot(start[0] - end[0], start[1] - end[1]) > 1e-10)
    throw Error(ErrorCode::InvariantViolation, "curve is not closed");

  auto sample = [&]() {
    const int n = opt.n_nodes;
    cm.s_nodes.resize(n);
    cm.k_samples.resize(n);
    for (int j = 0; j < n; ++j) {
      cm.s_nodes(j) = -cm.half_length + cm.length() * j / n;
      cm.k_samples(j) = cm.curvature(cm.s_nodes(j));
    }
  };
  // provisional origin at t = 0
  cm.t_origin = 0.0;
  sample();
  const WellInfo w0 = validate_double_well(cm);
  const CurveJet pr = c(cm.param_at(w0.s_r)), pl = c(cm.param_at(w0.s_ell));
  const double mx = 0.5 * (pr[0] + pl[0]), my = 0.5 * (pr[1] + pl[1]);
  const double dx = pr[0] - pl[0], dy = pr[1] - pl[1];
  auto g = [&](double t) {
    const CurveJet j = c(t);
    return (j[0] - mx) * dx + (j[1] - my) * dy;
  };
  std::vector<double> axis_t;
  const int m = 8192;
  for (int i = 0; i < m; ++i) {
    // offset keeps symmetric points off the sample nodes
    double a = kTwoPi * (i + 0.318) / m, b = kTwoPi * (i + 1.318) / m;
    double ga = g(a), gb = g(b);
    if (ga * gb > 0) continue;
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
      const double mid = 0.5 * (a + b);
      const double gm = g(mid);
      if ((gm < 0) == (ga < 0)) { a = mid; ga = gm; } else { b = mid; }
    }
    axis_t.push_back(0.5 * (a + b));
  }
  if (axis_t.size() != 2)
    throw Error(ErrorCode::SymmetryViolation,
                "well bisector meets the curve " + std::to_string(axis_t.size()) + " times");
  const CurveJet q0 = c(axis_t[0]), q1 = c(axis_t[1]);
  bool first_lower = (q0[1] < q1[1] - 1e-12) || (std::abs(q0[1] - q1[1]) <= 1e-12 && q0[0] < q1[0]);
  const bool pick_first = opt.origin_at_lower ? first_lower : !first_lower;
  cm.t_origin = pick_first ? axis_t[0] : axis_t[1];
  const double t_other = pick_first ? axis_t[1] : axis_t[0];
  const CurveJet qo = c(cm.t_origin);
  cm.convention.origin = {qo[0], qo[1]};
  cm.convention.orientation = 1;
  cm.convention.upper_point_s = opt.origin_at_lower ? cm.half_length : 0.0;

  sample();
  const WellInfo w = validate_double_well(cm);
  cm.s_r = w.s_r;
  cm.s_ell = w.s_ell;
  cm.k_max = w.k_max;
  cm.k2 = w.k2;
  cm.near_degenerate = std::abs(cm.k2) < opt.near_degenerate_k2;

  const double s_other = cm.raw_arclength(t_other) - cm.raw_arclength(cm.t_origin);
  const double off_axis = std::abs(std::abs(wrap_centered(s_other, cm.half_length)) - cm.half_length);
  const double scale = std::max(1.0, cm.half_length);
  if (off_axis > 1e-8 * scale || std::abs(cm.s_r + cm.s_ell) > 1e-7 * scale)
    throw Error(ErrorCode::SymmetryViolation, "wells or axis points are not mirror images");
  double asym = 0;
  for (Eigen::Index j = 1; j < cm.s_nodes.size(); ++j)
    asym = std::max(asym, std::abs(cm.k_samples(j) - cm.curvature(-cm.s_nodes(j))));
  if (asym > opt.symmetry_tol * std::max(1.0, cm.k_max))
    throw Error(ErrorCode::SymmetryViolation,
                "curvature is not even about the axis (max deviation " + std::to_string(asym) + ")");
  return cm;
}

CurveModel build_ellipse(double A, double B, const CurveOptions& opt) {
  if (!(A > 0 && B > 0)) throw Error(ErrorCode::ConfigInvalid, "ellipse semi-axes must be positive");
  if (std::abs(A - B) < 1e-12 * std::max(A, B))
    throw Error(ErrorCode::DegenerateCurvature, "circle has constant curvature");
  if (A < B) throw Error(ErrorCode::ConfigInvalid, "semi_major must exceed semi_minor");
  return build_curve(CurveKind::Ellipse, {{"semi_major", A}, {"semi_minor", B}}, ellipse_curve(A, B),
                     opt);
}

CurveModel build_fourier_curve(double R, const std::map<int, double>& coeffs, const CurveOptions& opt) {
  if (!(R > 0)) throw Error(ErrorCode::ConfigInvalid, "radius must be positive");
  bool trivial = true;
  for (const auto& [m, c] : coeffs) {
    if (m < 1) throw Error(ErrorCode::ConfigInvalid, "Fourier modes must be >= 1");
    if (m >= 2 && c != 0.0) trivial = false;
  }
  if (trivial) throw Error(ErrorCode::DegenerateCurvature, "circle has constant curvature");
  for (int i = 0; i < 8192; ++i) {
    const double t = kTwoPi * i / 8192;
    double r = 1;
    for (const auto& [m, c] : coeffs) r += c * std::cos(m * t);
    if (!(r > 0)) throw Error(ErrorCode::SelfIntersection, "radial function is not positive");
  }
  std::map<std::string, double> p{{"radius", R}};
  for (const auto& [m, c] : coeffs) p["c" + std::to_string(m)] = c;
  return build_curve(CurveKind::Fourier, p, fourier_curve(R, coeffs), opt);
}

CurveModel build_tabulated(const std::vector<std::array<double, 2>>& pts, const CurveOptions& opt) {
  std::vector<std::array<double, 2>> p = pts;
  if (p.size() > 1 && std::hypot(p.front()[0] - p.back()[0], p.front()[1] - p.back()[1]) < 1e-14)
    p.pop_back();
  const int n = int(p.size());
  if (n < 16) throw Error(ErrorCode::ConfigInvalid, "tabulated curve needs at least 16 points");
  // chord-length parameter, then linear resampling to a uniform grid
  std::vector<double> u(n + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto& a = p[i];
    const auto& b = p[(i + 1) % n];
    u[i + 1] = u[i] + std::hypot(b[0] - a[0], b[1] - a[1]);
  }
  const int m = std::max(1024, int(std::pow(2.0, std::ceil(std::log2(double(n))))));
  std::vector<std::complex<double>> z(m);
  // cubic (Catmull-Rom) interpolation in chord length
  for (int k = 0; k < m; ++k) {
    const double target = u[n] * k / m;
    int i = int(std::upper_bound(u.begin(), u.end(), target) - u.begin()) - 1;
    i = std::clamp(i, 0, n - 1);
    const double x = (target - u[i]) / (u[i + 1] - u[i]);
    auto P = [&](int j) {
      const auto& q = p[((j % n) + n) % n];
      return std::complex<double>(q[0], q[1]);
    };
    const auto p0 = P(i - 1), p1 = P(i), p2 = P(i + 1), p3 = P(i + 2);
    z[k] = 0.5 * (2.0 * p1 + (-p0 + p2) * x + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * x * x +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * x * x * x);
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> zh;
  fft.fwd(zh, z);
  // low-pass filter; keep modes |j| <= n/4
  const int jmax = std::max(8, std::min(m / 2 - 1, n / 4));
  std::vector<std::pair<int, std::complex<double>>> modes;
  for (int j = -jmax; j <= jmax; ++j) {
    const double w = std::exp(-36.0 * std::pow(double(std::abs(j)) / jmax, 16));
    modes.emplace_back(j, zh[(j + m) % m] * (w / m));
  }
  ParametricCurve c = [modes](double t) {
    std::complex<double> d[4];
    for (const auto& [j, a] : modes) {
      const std::complex<double> e = a * std::polar(1.0, j * t);
      const std::complex<double> ij(0, j);
      d[0] += e;
      d[1] += ij * e;
      d[2] += ij * ij * e;
      d[3] += ij * ij * ij * e;
    }
    return CurveJet{d[0].real(), d[0].imag(), d[1].real(), d[1].imag(),
                    d[2].real(), d[2].imag(), d[3].real(), d[3].imag()};
  };
  CurveOptions o = opt;
  o.symmetry_tol = std::max(opt.symmetry_tol, 1e-4);
  return build_curve(CurveKind::Tabulated, {{"points", double(n)}}, c, o);
}

std::vector<std::array<double, 2>> read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open curve file " + path);
  std::vector<std::array<double, 2>> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double x, y;
    if (ss >> x >> y) pts.push_back({x, y});
  }
  return pts;
}

double circulation(const CurveModel& curve) { return curve.area / curve.length(); }

}  // namespace magstep
