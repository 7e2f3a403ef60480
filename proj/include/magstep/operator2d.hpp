#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "magstep/geometry.hpp"
#include "magstep/model1d.hpp"

namespace magstep {

using cplx = std::complex<double>;

// Which tangential Fourier modes enter the window. Even/Odd select by the
// parity of the absolute mode index; on a curve with k(s + L) = k(s) the
// operator decouples into these two classes.
enum class ModeParity { All, Even, Odd };

// Tangential direction: a window of n_sigma Fourier modes on a periodic box.
// Normal direction: n_tau interior nodes of a uniform grid with Dirichlet ends
// and tau = 0 a node.
struct StripGrid {
  int n_sigma = 48;
  int n_tau = 0;              // 0: derived from tau_spacing
  double tau_spacing = 0.11;
  double tau_half_width = 0;  // 0: max(tau_min_width, 4 / mu), capped at tau_cap
  double tau_min_width = 12.0;
  double tau_cap = 14.0;
  int quadrature = 0;         // tangential samples for the Toeplitz symbols, 0: auto
  ModeParity parity = ModeParity::All;
};

// Smooth cutoff: 1 on [-1, 1], 0 outside (-2, 2), quintic smoothstep between.
double cutoff(double x);
double cutoff_d1(double x);

// Strip description independent of the curve model: curvature on a periodic
// box [start, start + length).
struct StripSpec {
  double a = -0.5;
  double zeta = 0;          // centers the mode window
  double hbar = 0.1;
  double eta = 0.125;
  double gamma0 = 0;        // flux term is gamma0 / hbar
  double box_start = 0;
  double box_length = 0;
  std::function<double(double)> k, dk;
  double k_max = 0;         // for the weight guard
  double min_weight = 0.2;
};

struct WeightedOperator2D {
  double a = 0;
  double hbar = 0;
  double eta = 0;
  double mu = 0;
  double gamma0 = 0;
  double flux_residual = 0;  // gamma0 / hbar + hbar kappa_{n0}
  double box_start = 0, box_length = 0;
  int n0 = 0;                // window center (absolute mode index)
  std::vector<int> modes;    // absolute indices
  ModeParity parity = ModeParity::All;
  double dtau = 0;
  int zero_index = 0;
  Eigen::VectorXd tau;       // interior nodes
  Eigen::VectorXd cutoff;    // c_mu at the nodes
  double tau_lo = 0, tau_hi = 0;  // Dirichlet ends
  bool cutoff_inside = false;     // cutoff support within the grid
  double min_weight = 0, max_weight = 0;
  std::vector<Eigen::MatrixXcd> diag;   // n_tau blocks
  std::vector<Eigen::MatrixXcd> upper;  // coupling i -> i + 1
  double shift_hint = 0;
  double level_spacing = 0;  // expected spacing of the lowest levels, 0: unknown

  int n_sigma() const { return int(modes.size()); }
  int n_tau() const { return int(tau.size()); }
  Eigen::Index size() const { return Eigen::Index(modes.size()) * tau.size(); }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;
  Eigen::SparseMatrix<cplx> sparse() const;
  Eigen::MatrixXcd dense() const;
  // Largest |H - H^*| over the stored blocks.
  double hermitian_defect() const;
};

WeightedOperator2D assemble_strip(const StripSpec& spec, const StripGrid& grid);

// Full operator on the closed curve, s in [-L, L).
WeightedOperator2D assemble_full(const EdgeConstants& c, const CurveModel& curve, double hbar,
                                 double eta, const StripGrid& grid, double flux_shift = 0.0);

enum class WellSide { Right, Left };

// Curvature extended from one period around the chosen well, blended to 0
// over the eta-hat windows next to the opposite well.
struct WellExtension {
  double box_start = 0, box_length = 0;
  double eta_hat = 0;
  std::function<double(double)> k, dk;
  double k_max = 0;
  double secondary_max = 0;  // largest other local maximum
};
WellExtension extend_curvature(const CurveModel& curve, WellSide side, double pad_fraction = 0.25);

WeightedOperator2D assemble_single_well(const EdgeConstants& c, const CurveModel& curve,
                                        WellSide side, double hbar, double eta,
                                        const StripGrid& grid, bool with_flux = true);

struct EigenResult {
  Eigen::VectorXd values;
  Eigen::VectorXd residuals;
  Eigen::MatrixXcd vectors;
  int iterations = 0;
  double shift = 0;
  double tail_mass = 0;  // ground state mass with |tau| beyond 5 decay lengths
};

// Shift-invert Lanczos on the block-tridiagonal matrix, shift below the
// lowest eigenvalue (certified by a successful block Cholesky).
EigenResult lowest_eigs(const WeightedOperator2D& op, int count, double tol = 1e-11,
                        bool want_vectors = false);
Eigen::VectorXd dense_eigs(const WeightedOperator2D& op, int count);

// Fiber band over the discrete dual lattice of the window, on the same tau grid.
double fiber_band_minimum(const WeightedOperator2D& op);

void write_coo(const WeightedOperator2D& op, const std::string& path);

struct AhkFit {
  double beta_fit = 0, c1_fit = 0, c2_fit = 0;
  double beta = 0, c1 = 0, c2 = 0;  // predicted
  std::vector<double> hbar, nu;
  std::vector<double> extra;              // coefficients of hbar^2, hbar^{5/2}, ...
  std::array<double, 3> three_term{};     // same fit without the extra columns
  double rms = 0;
};
// nu_1 on the right single well against {1, hbar, hbar^{3/2}} plus
// extra_terms further powers hbar^{2}, hbar^{5/2}, ...
AhkFit ahk_coefficient_fit(const EdgeConstants& c, const CurveModel& curve,
                           const std::vector<double>& hbars, double eta, const StripGrid& grid,
                           int extra_terms = 1, int jobs = 1);

struct Gap2D {
  double hbar = 0;
  double nu1 = 0, nu2 = 0;
  double gap = 0;         // nu2 - nu1
  double signed_gap = 0;  // nu_odd - nu_even in the symmetric split
  double resolution = 0;
  bool split = false;     // parity classes used
};
// Lowest pair of the full operator. When the curve has k(s + L) = k(s) the
// two parity classes are solved separately.
Gap2D gap_2d(const EdgeConstants& c, const CurveModel& curve, double hbar, double eta,
             const StripGrid& grid, double flux_shift = 0.0);
bool half_period_symmetric(const CurveModel& curve, double tol = 1e-9);

struct EnvelopeRow {
  double hbar = 0;
  double gap0 = 0, gap_quarter = 0, envelope = 0, predicted = 0;
};
// sqrt(gap(flux)^2 + gap(flux + pi h / (2L))^2): free of the interference factor.
EnvelopeRow gap_envelope(const EdgeConstants& c, const CurveModel& curve, double hbar, double eta,
                         const StripGrid& grid);

struct ExponentFit2D {
  double S_fit = 0;
  double power = 1.25;  // prefactor power of hbar
  double rms = 0;
  std::vector<EnvelopeRow> rows;
};
// ln(envelope) - power ln hbar against hbar^{-1/2}.
ExponentFit2D gap_exponent_fit_2d(const EdgeConstants& c, const CurveModel& curve,
                                  const std::vector<double>& hbars, double eta,
                                  const StripGrid& grid, int jobs = 1);

struct InterferenceScan {
  std::vector<double> hbar, signed_gap;
  std::vector<double> zeros_inv_h;  // 1/h at the interference zeros
  double spacing = 0;               // mean spacing in 1/h
  double expected = 0;              // pi / (L gamma0)
};
// Zeros of the signed gap on [hbar_lo, hbar_hi], located by bracketing on
// n_points samples and secant refinement.
InterferenceScan interference_scan(const EdgeConstants& c, const CurveModel& curve, double hbar_lo,
                                   double hbar_hi, int n_points, double eta, const StripGrid& grid,
                                   int jobs = 1);

}  // namespace magstep
