#pragma once

#include <Eigen/Core>
#include <array>
#include <complex>
#include <functional>
#include <vector>

#include "magstep/geometry.hpp"
#include "magstep/moments.hpp"
#include "magstep/tunneling.hpp"

namespace magstep {

using cplx = std::complex<double>;
using VectorXc = Eigen::VectorXcd;

struct WkbConfig {
  // Asymmetric normal grid: the weak-field side decays slowly.
  double tau_neg = 24.0;
  double tau_pos = 8.0;
  double spacing = 0.01;
  double min_weight = 0.1;      // guard on 1 - hbar tau k over the grid
  double window = 0.5;          // residual window radius around s_r
  double dsigma = 0.02;         // tangential step for the residual stencils
  double frobenius = 1e-3;      // start radius, as a fraction of L
  int profile_nodes = 2001;     // transport profile on the cut circle
  int orientation = 1;          // -1 conjugates the phase
};

// The order-three solvability projection splits as
//   <RHS_3(f0 = 1), phi> = delta_3 - (mu''/2) Phi'' - i F,
// and F = -Phi' (k c_k + Phi'^2 c_p) exactly at the discrete level.
struct PhaseCoefficients {
  double c_k = 0;
  double c_p = 0;
};

struct TransportProfile {
  VectorXd sigma;
  VectorXd Phi;      // Agmon distance from s_r along the line
  VectorXd dPhi;     // signed sqrt(V)
  VectorXd f_mod;    // transport modulus
  VectorXd alpha0;   // phase, alpha0(s_r) = 0
  VectorXd F;
  double f_at_well = 0;
  double f_at_0 = 0;
  double alpha_a = 0;
};

struct WkbContext {
  EdgeConstants constants;
  CurveModel curve;
  EffectivePotential potential;
  ResolventContext resolvent;  // on the asymmetric WKB grid
  VectorXd w;                  // zeta + b tau
  VectorXd rho;                // R[(zeta + b tau) phi]
  PhaseCoefficients phase;
  std::array<double, 4> delta{};
  WkbConfig config;
  TransportProfile profile;
};

// Profiles of one tangential point: value and sigma derivative data needed by
// the recursion.
struct SigmaJet {
  double sigma = 0;
  double k = 0;
  double dphi = 0;   // Phi'
  double ddphi = 0;  // Phi''
  cplx f0 = 1.0;
  cplx df0 = 0.0;
};

struct QuasiMode {
  int order = 0;
  double hbar = 0;
  VectorXd sigma;
  Grid1D tau;
  std::array<double, 4> delta{};
  VectorXd Phi;
  VectorXc f0;
  VectorXd alpha0;
  std::vector<Eigen::MatrixXcd> b;  // b[j](m, i) at sigma m, tau node i
};

struct ResidualReport {
  int order = 0;
  double hbar = 0;
  VectorXd sigma;
  VectorXd residual;  // L2 in tau at each sigma of the window
  double sup = 0;
};

Grid1D wkb_grid(const WkbConfig& cfg);

WkbContext make_wkb_context(const EdgeConstants& c, const CurveModel& curve,
                            const FiberConfig& fiber = {}, const WkbConfig& cfg = {});

// Signed sqrt(V) and its derivative on the line around s_r.
double wkb_dphi(const WkbContext& ctx, double sigma);
double wkb_ddphi(const WkbContext& ctx, double sigma);

// Projection of the order-three right side on phi for a given tangential jet.
cplx solvability_projection(const WkbContext& ctx, const SigmaJet& jet);

// Direct assembly of F at each sigma (paper sign: alpha0' = -F / (mu'' Phi')).
VectorXd compute_F(const WkbContext& ctx, const VectorXd& sigma);
PhaseCoefficients phase_coefficients(const WkbContext& ctx);

// Generic transport solver: modulus from (mu''/2)(2 Phi' f' + Phi'' f) = delta3 f,
// written as (ln f)' = (g - Phi'') / (2 Phi'), started from a linear
// Frobenius patch on |sigma - s_r| < start_radius; phase from alpha0' = G.
struct TransportInput {
  std::function<double(double)> dphi, ddphi, dalpha;
  double s_r = 0, g = 0, start_radius = 1e-3;
  double f_at_well = 1.0;
};
void transport_amplitude(const TransportInput& in, const VectorXd& sigma, VectorXd& f_mod,
                         VectorXd& alpha0);

TransportProfile transport_profile(const WkbContext& ctx, const VectorXd& sigma);

// (alpha0(0) - alpha0(L)) / L from a profile containing both points.
double alpha_constant(const VectorXd& sigma, const VectorXd& alpha0, double L);

SigmaJet sigma_jet(const WkbContext& ctx, double sigma);

// b_0 .. b_N at one sigma (N <= 3).
std::vector<VectorXc> wkb_profiles(const WkbContext& ctx, const SigmaJet& jet, int order);

QuasiMode assemble_quasimode(const WkbContext& ctx, double hbar, int order,
                             const VectorXd& sigma);

// ||Psi^N||^2 over the profile range.
double quasimode_norm(const WkbContext& ctx, double hbar);

// Conjugated single-well operator (c_mu = 1) applied to the truncated
// quasimode, L2 in tau on each window sigma.
ResidualReport residual_norm(const WkbContext& ctx, double hbar, int order);

double residual_slope(const WkbContext& ctx, int order, const std::vector<double>& hbars,
                      std::vector<ResidualReport>* reports = nullptr);

}  // namespace magstep
