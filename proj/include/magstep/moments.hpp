#pragma once

#include <map>
#include <memory>
#include <string>

#include "magstep/model1d.hpp"

namespace magstep {

struct ResolventFactor;  // bordered-system factorization

struct ResolventContext {
  EdgeConstants constants;
  FiberSolution fiber;  // at xi = zeta_a
  std::shared_ptr<const ResolventFactor> factor;
};

struct MomentReport {
  double a = 0;
  std::map<int, double> m;
  double i2 = 0;
  double inv_b_mass = 0;  // int (1/b) phi^2
  std::map<std::string, double> identity_residuals;
  double spacing = 0;
};

// Builds the context on the configured grid: minimizer, fiber at zeta,
// band curvature and the bordered factorization.
ResolventContext make_resolvent_context(double a, const FiberConfig& cfg);

// Bordered-system factorization for a given fiber solution (mu_pp only used
// for reporting).
ResolventContext make_resolvent_context(const FiberSolution& fiber, double mu_pp);

// R_a u on the fiber grid (endpoint values ignored and returned as zero).
VectorXd regularized_apply(const ResolventContext& ctx, const VectorXd& u);

// (h_a[zeta] - beta) u with the same stencil as the solver.
VectorXd shifted_fiber_apply(const ResolventContext& ctx, const VectorXd& u);

// Trapezoid inner product on the fiber grid.
double grid_inner(const FiberSolution& fiber, const VectorXd& u, const VectorXd& v);

// M_n = int (1/b)(zeta + b tau)^n phi^2, n in {1,2,3}.
double moment(const ResolventContext& ctx, int n);

MomentReport identity_suite(const ResolventContext& ctx);

// Second-order Richardson combination of reports at spacing h and 2h.
MomentReport richardson(const MomentReport& fine, const MomentReport& coarse);

// Default identity tolerance max(1e-8, 10 h^2).
double identity_tolerance(double spacing);

// theta0 < 0 means compute the de Gennes constant for the bounds check.
EdgeConstants edge_constants(double a, const FiberConfig& cfg = {}, double theta0 = -1.0);

void check_edge_invariants(const EdgeConstants& c, double theta0);

}  // namespace magstep
