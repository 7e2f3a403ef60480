#pragma once

#include <complex>
#include <functional>

#include "magstep/geometry.hpp"
#include "magstep/model1d.hpp"

namespace magstep {

enum class Provenance { MagneticStep, Neumann };

// Band data entering the tangential reduction, from either model.
struct BandData {
  Provenance provenance = Provenance::MagneticStep;
  double zeta = 0;   // band minimizer (zeta_a or xi_0)
  double beta = 0;   // band minimum (beta_a or Theta_0)
  double mu_pp = 0;  // band curvature at the minimizer
  double weight = 0; // -M3(a) or C1: V = 2 weight (k_max - k) / mu_pp
};

BandData band_data(const EdgeConstants& c);
BandData band_data(const DeGennesConstants& c);

struct EffectivePotential {
  CurveModel curve;
  BandData band;
  double scale = 0;  // V = scale (k_max - k)
  double g = 0;      // sqrt(V''(well) / 2)
  double g_fit = 0;  // quadratic fit at the wells
  Eigen::VectorXd samples;

  double value(double s) const;
  double sqrt_value(double s) const;
};

EffectivePotential effective_potential(const BandData& band, const CurveModel& curve);

struct AgmonData {
  Eigen::VectorXd phi_r, phi_ell;  // on curve.s_nodes
  double S_u = 0, S_d = 0, S = 0;
  double A_u = 0, A_d = 0;
  double V0 = 0, VL = 0;  // V at s = 0 and s = L
  double quad_error = 0;  // largest relative panel-doubling difference
};

struct QuadratureOptions {
  int panels = 64;
  double rel_tol = 1e-6;
};

AgmonData agmon(const EffectivePotential& v, const QuadratureOptions& q = {});

// log A for the path from a well (t = 0) to a point at distance T along the
// curve, where sqrt_v(t) is sqrt(V) along the path. Uses the local model g t.
double log_path_prefactor(const std::function<double(double)>& sqrt_v, double g, double T,
                          const QuadratureOptions& q, double* err = nullptr);

struct TunnelingPrediction {
  double h = 0;
  std::complex<double> w_tilde;
  double gap_predicted = 0;
  double gamma0 = 0, zeta = 0, alpha = 0, f = 0;
  double component_u = 0, component_d = 0;  // A sqrt(V) exp(-S / h^{1/4})
  double prefactor = 0;                     // mu'' h^{13/8} pi^{-1/2} g^{1/2}
  double S_u = 0, S_d = 0, A_u = 0, A_d = 0, g = 0;
};

TunnelingPrediction splitting_predict(const EffectivePotential& v, const AgmonData& ag,
                                      double gamma0, double alpha, double h);
TunnelingPrediction splitting_predict(const EdgeConstants& c, const CurveModel& curve, double alpha,
                                      double h);
TunnelingPrediction splitting_predict_neumann(const DeGennesConstants& c, const CurveModel& curve,
                                              double h, double alpha = 0.0);

// Open arc with curvature even about s = 0 and maxima at +-s_r.
struct ArcSpec {
  std::function<double(double)> curvature;
  double s_r = 0;
  double symmetry_tol = 1e-8;
};

struct TransversalResult {
  double gap = 0, S = 0, A = 0, g = 0, V0 = 0;
};

TransversalResult splitting_predict_transversal(const ArcSpec& arc, const BandData& band, double h,
                                                const QuadratureOptions& q = {});
ArcSpec arc_from_curve(const CurveModel& curve);

}  // namespace magstep
