#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "magstep/errors.hpp"

namespace magstep {

// Position and first three t-derivatives of a closed curve, period 2 pi:
// {x, y, x', y', x'', y'', x''', y'''}.
using CurveJet = std::array<double, 8>;
using ParametricCurve = std::function<CurveJet(double t)>;

enum class CurveKind { Ellipse, Fourier, Tabulated, Custom };

std::string curve_kind_name(CurveKind k);

struct ArcConvention {
  std::array<double, 2> origin{};  // axis point with s = 0
  int orientation = 1;              // +1 counterclockwise
  double upper_point_s = 0;         // 0 or L
};

struct CurveOptions {
  int n_nodes = 4096;
  bool origin_at_lower = true;  // s = 0 at the lower axis point
  double symmetry_tol = 1e-8;
  double near_degenerate_k2 = 0.1;
};

class CurveModel {
 public:
  CurveKind kind = CurveKind::Custom;
  std::map<std::string, double> params;
  double half_length = 0;  // L, |Gamma| = 2L
  double area = 0;
  Eigen::VectorXd s_nodes;  // uniform on [-L, L)
  Eigen::VectorXd k_samples;
  double s_r = 0, s_ell = 0;
  double k_max = 0, k2 = 0;
  bool near_degenerate = false;
  ArcConvention convention;

  double length() const { return 2.0 * half_length; }
  // Curvature and its arclength derivative at any s (periodic, period 2L).
  double curvature(double s) const;
  double curvature_d1(double s) const;
  double curvature_d2(double s) const;
  std::array<double, 2> point(double s) const;
  // Curve parameter t for arclength s.
  double param_at(double s) const;

  // internal state, populated by build_curve
  ParametricCurve curve;
  std::vector<double> panel_s;  // cumulative arclength at panel starts in t
  double t_origin = 0;
  double param_length() const { return 2.0 * half_length; }

 private:
  double raw_arclength(double t) const;  // from t = 0
  friend CurveModel build_curve(CurveKind, std::map<std::string, double>, ParametricCurve,
                                const CurveOptions&);
};

// Generic builder: arc-length tables, wells, symmetry axis and convention.
CurveModel build_curve(CurveKind kind, std::map<std::string, double> params, ParametricCurve c,
                       const CurveOptions& opt = {});

CurveModel build_ellipse(double semi_major, double semi_minor, const CurveOptions& opt = {});
// r(theta) = radius (1 + sum_m c_m cos(m theta))
CurveModel build_fourier_curve(double radius, const std::map<int, double>& cos_coeffs,
                               const CurveOptions& opt = {});
// Closed polyline, resampled by a smoothed trigonometric interpolant.
CurveModel build_tabulated(const std::vector<std::array<double, 2>>& points,
                           const CurveOptions& opt = {});
std::vector<std::array<double, 2>> read_curve_csv(const std::string& path);

// Rotation by angle then translation.
ParametricCurve rigid_motion(ParametricCurve c, double angle, double dx, double dy);

ParametricCurve ellipse_curve(double semi_major, double semi_minor);
ParametricCurve fourier_curve(double radius, const std::map<int, double>& cos_coeffs);

struct WellInfo {
  double s_r, s_ell, k_max, k2;
};
WellInfo validate_double_well(const CurveModel& curve);

double circulation(const CurveModel& curve);

}  // namespace magstep
