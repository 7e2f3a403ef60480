#include <doctest.h>

#include <cmath>

#include "magstep/moments.hpp"

using namespace magstep;

namespace {

MomentReport extrapolated(double a) {
  FiberConfig fine, coarse;
  coarse.spacing = 2 * fine.spacing;
  return richardson(identity_suite(make_resolvent_context(a, fine)),
                    identity_suite(make_resolvent_context(a, coarse)));
}

}  // namespace

TEST_SUITE("moments") {
  TEST_CASE("identity suite at a = -0.5") {
    const MomentReport r = extrapolated(-0.5);
    const auto& res = r.identity_residuals;
    CHECK(std::abs(res.at("m1")) < 1e-8);
    CHECK(std::abs(res.at("m3_closed_form")) < 1e-6);
    for (const char* k : {"m2_closed_form", "tau_u", "tau_u2", "b_tau2_u", "tau_phi2", "tau_dphi2"})
      CHECK_MESSAGE(std::abs(res.at(k)) < 1e-6, k);
    CHECK(std::abs(res.at("i2")) < 1e-4);
    CHECK(std::abs(res.at("stationarity")) < 1e-6);
    CHECK(r.m.at(3) == doctest::Approx(-0.0371734306).epsilon(1e-6));
  }

  TEST_CASE("I2 closed form at the ends of the range") {
    for (double a : {-0.9, -0.1}) {
      const ResolventContext ctx = make_resolvent_context(a, FiberConfig{});
      const MomentReport r = identity_suite(ctx);
      CHECK(r.i2 == doctest::Approx(0.25 - ctx.constants.mu_pp / 8).epsilon(1e-4));
    }
  }

  TEST_CASE("regularized resolvent inverts the shifted fiber on phi-perp") {
    const ResolventContext ctx = make_resolvent_context(-0.5, FiberConfig{});
    const FiberSolution& s = ctx.fiber;
    VectorXd u(s.phi.size());
    for (Index i = 0; i < u.size(); ++i) {
      const double t = s.grid.nodes(i);
      u(i) = t * std::exp(-t * t / 4);
    }
    u(0) = u(u.size() - 1) = 0;
    const VectorXd ru = regularized_apply(ctx, u);
    CHECK(std::abs(grid_inner(s, ru, s.phi)) < 1e-9);
    const VectorXd back = shifted_fiber_apply(ctx, ru);
    const VectorXd target = u - grid_inner(s, u, s.phi) * s.phi;
    double err = 0, scale = 0;
    for (Index i = 1; i + 1 < u.size(); ++i) {
      err = std::max(err, std::abs(back(i) - target(i)));
      scale = std::max(scale, std::abs(target(i)));
    }
    CHECK(err < 1e-8 * scale);
  }

  TEST_CASE("unsupported moment order") {
    const ResolventContext ctx = make_resolvent_context(-0.5, FiberConfig{});
    CHECK_THROWS_AS(moment(ctx, 4), Error);
  }

  TEST_CASE("quadrature residuals shrink under grid halving") {
    FiberConfig fine, coarse;
    fine.spacing = 0.004;
    coarse.spacing = 0.008;
    const MomentReport rf = identity_suite(make_resolvent_context(-0.5, fine));
    const MomentReport rc = identity_suite(make_resolvent_context(-0.5, coarse));
    for (const char* k : {"m1", "tau_u", "tau_phi2"}) {
      const double f = std::abs(rf.identity_residuals.at(k)), c = std::abs(rc.identity_residuals.at(k));
      if (f > 1e-12) CHECK_MESSAGE(c / f > 3.0, k);
    }
  }

  TEST_CASE("invariant checks reject bad constants") {
    EdgeConstants c;
    c.a = -0.5;
    c.zeta_a = -0.6;
    c.beta_a = 0.1;  // below |a| Theta0
    c.mu_pp = 1;
    c.dphi_at_0 = -1;
    c.m3 = -0.01;
    CHECK_THROWS_AS(check_edge_invariants(c, 0.59), Error);
  }
}
