#pragma once

#include <vector>

#include "magstep/tunneling.hpp"

namespace magstep {

struct PeriodicOperator1D {
  double h = 0;
  double half_length = 0;
  Eigen::VectorXd nodes;      // uniform on [-L, L)
  Eigen::VectorXd potential;  // V at the nodes
  Eigen::VectorXd diag, off;  // symmetric tridiagonal part
  double corner = 0;          // coupling between first and last node
  bool reflection_symmetric = false;  // V(s_j) = V(s_{n-j}) exactly, n even
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd dense() const;
};

// (mu''/2)(-h^{1/2} D2 + V) on the periodic grid.
PeriodicOperator1D assemble(const EffectivePotential& v, double h, int n);
// Same with explicit potential samples (used for masked wells).
PeriodicOperator1D assemble_samples(double mu_pp, double half_length, const Eigen::VectorXd& potential,
                                    double h);

struct LowestPair {
  double nu1 = 0, nu2 = 0, gap = 0;
  double accuracy = 0;      // absolute eigenvalue accuracy
  double gap_accuracy = 0;  // absolute accuracy of the gap
  Eigen::VectorXd ground;
};

// For reflection-symmetric operators the pair is split into the even
// (Neumann half-grid) and odd (Dirichlet half-grid) ground states and the gap
// comes from the discrete Wronskian at the two axis nodes, which stays
// accurate far below the eigenvalue resolution.
LowestPair lowest_pair(const PeriodicOperator1D& op, int dense_threshold = 4096);
LowestPair lowest_pair_full(const PeriodicOperator1D& op, int dense_threshold = 4096);
// k lowest eigenvalues (periodic Sturm bisection).
Eigen::VectorXd lowest_eigenvalues(const PeriodicOperator1D& op, int count);

struct HarmonicReport {
  double h = 0;
  double delta3 = 0;
  std::vector<double> levels;     // nu_n, effective normalization
  std::vector<double> ladder;     // (2n-1) delta3 h^{1/4}
  std::vector<double> rel_error;
  double spacing = 0;             // nu_2 - nu_1
  double spacing_expected = 0;    // 2 delta3 h^{1/4}
  double spacing_ratio = 0;       // (nu_3 - nu_1)/(nu_2 - nu_1), ideally 2
};

// Levels of the right well (left half masked by a shelf).
HarmonicReport harmonic_levels_check(const EffectivePotential& v, double h, int count, int n = 4096);

struct GapRow {
  double h = 0, nu1 = 0, nu2 = 0, gap = 0, predicted = 0;
  bool used = false;
};

struct GapFit {
  double S_fit = 0;        // fixed prefactor power
  double power = 0.125;    // fixed power used
  double S_fit_free = 0;   // with the power also fitted
  double power_fit = 0;
  double log_prefactor = 0;
  double rms = 0;
  std::vector<GapRow> rows;
};

struct GapFitOptions {
  int n = 4096;
  double max_exponent = 400.0;  // skip S/h^{1/4} above this (underflow guard)
  double noise_factor = 1e3;
  int jobs = 1;
};

// Regression of ln(gap) - power ln h against h^{-1/4}.
GapFit gap_exponent_fit(const EffectivePotential& v, const std::vector<double>& h_list,
                        const GapFitOptions& opt = {});

// Phase-free effective gap from the closed-form two-path sum.
double effective_gap_prediction(const EffectivePotential& v, const AgmonData& ag, double h);

std::vector<double> geometric_sweep(double lo, double hi, int count);
// h values with S/h^{1/4} geometrically spaced over [x_lo, x_hi].
std::vector<double> exponent_window_sweep(double S, double x_lo, double x_hi, int count);

}  // namespace magstep
