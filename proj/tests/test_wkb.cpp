#include <doctest.h>

#include <cmath>

#include "magstep/wkb.hpp"

using namespace magstep;

namespace {

const WkbContext& context() {
  static const WkbContext ctx = make_wkb_context(edge_constants(-0.5), build_ellipse(4, 3));
  return ctx;
}

}  // namespace

TEST_SUITE("wkb") {
  TEST_CASE("eigenvalue ladder coefficients") {
    const WkbContext& ctx = context();
    const EdgeConstants& c = ctx.constants;
    CHECK(ctx.delta[0] == doctest::Approx(c.beta_a));
    CHECK(ctx.delta[1] == doctest::Approx(0.0));
    CHECK(ctx.delta[2] == doctest::Approx(c.m3 * ctx.curve.k_max).epsilon(1e-9));
    CHECK(ctx.delta[3] == doctest::Approx(0.5 * c.mu_pp * ctx.potential.g).epsilon(1e-9));
  }

  TEST_CASE("solvability projection vanishes along the transported amplitude") {
    const WkbContext& ctx = context();
    for (double d : {-0.6, -0.2, 0.3, 0.8}) {
      SigmaJet jet = sigma_jet(ctx, ctx.curve.s_r + d);
      const double scale = std::abs(jet.f0) * ctx.delta[3];
      CHECK(std::abs(solvability_projection(ctx, jet)) < 1e-3 * scale);
      jet.f0 = 1.0;
      jet.df0 = 0.0;
      CHECK(solvability_projection(ctx, jet).real() ==
            doctest::Approx(ctx.delta[3] - 0.5 * ctx.constants.mu_pp * jet.ddphi).epsilon(1e-5));
    }
  }

  TEST_CASE("F is linear in Phi'") {
    const WkbContext& ctx = context();
    VectorXd s(5);
    s << -0.8, -0.3, 0.0, 0.4, 0.9;
    s.array() += ctx.curve.s_r;
    const VectorXd F = compute_F(ctx, s);
    for (Index i = 0; i < s.size(); ++i) {
      const double p = wkb_dphi(ctx, s(i)), k = ctx.curve.curvature(s(i));
      CHECK(F(i) == doctest::Approx(-p * (k * ctx.phase.c_k + p * p * ctx.phase.c_p)).epsilon(1e-6));
    }
    CHECK(std::abs(F(2)) < 1e-10);
  }

  TEST_CASE("transport modulus reproduces the Agmon prefactor") {
    const WkbContext& ctx = context();
    const AgmonData ag = agmon(ctx.potential);
    CHECK(ctx.profile.f_at_0 / ctx.profile.f_at_well == doctest::Approx(std::sqrt(ag.A_u)).epsilon(1e-5));
  }

  TEST_CASE("orientation conjugates the phase") {
    WkbConfig cfg;
    cfg.orientation = -1;
    const WkbContext flipped = make_wkb_context(edge_constants(-0.5), build_ellipse(4, 3), {}, cfg);
    CHECK(flipped.profile.alpha_a == doctest::Approx(-context().profile.alpha_a).epsilon(1e-10));
  }

  TEST_CASE("residual slopes grow with the order") {
    const std::vector<double> hb{0.05, 0.1, 0.2};
    const double s1 = residual_slope(context(), 1, hb);
    const double s3 = residual_slope(context(), 3, hb);
    CHECK(s1 >= 0.7);
    CHECK(s3 >= 1.7);
    CHECK(s3 > s1 + 0.5);
  }

  TEST_CASE("orders beyond three are unavailable") {
    const SigmaJet jet = sigma_jet(context(), context().curve.s_r);
    CHECK_THROWS_AS(wkb_profiles(context(), jet, 4), Error);
    CHECK_THROWS_AS(residual_norm(context(), 0.1, 4), Error);
  }

  TEST_CASE("metric guard") {
    CHECK_THROWS_AS(residual_norm(context(), 0.5, 0), Error);
  }
}
