#include <doctest.h>

#include <cmath>

#include "magstep/moments.hpp"
#include "magstep/tunneling.hpp"

using namespace magstep;

namespace {

const EdgeConstants& constants() {
  static const EdgeConstants c = edge_constants(-0.5);
  return c;
}

// Trapezoid action along [s0, s1] (s0 < s1).
double action(const EffectivePotential& v, double s0, double s1, int n = 20000) {
  double sum = 0;
  const double h = (s1 - s0) / n;
  for (int i = 0; i <= n; ++i) sum += (i == 0 || i == n ? 0.5 : 1.0) * v.sqrt_value(s0 + i * h);
  return sum * h;
}

}  // namespace

TEST_SUITE("tunneling") {
  TEST_CASE("Agmon actions match direct quadrature") {
    const CurveModel curve = build_fourier_curve(1.0, {{2, -0.1}, {3, 0.02}});
    const EffectivePotential v = effective_potential(band_data(constants()), curve);
    const AgmonData ag = agmon(v);
    const double L = curve.half_length;
    const double through0 = action(v, curve.s_ell, curve.s_r);
    const double throughL = action(v, curve.s_r, curve.s_ell + 2 * L);
    CHECK(std::min(ag.S_u, ag.S_d) == doctest::Approx(std::min(through0, throughL)).epsilon(1e-6));
    CHECK(std::max(ag.S_u, ag.S_d) == doctest::Approx(std::max(through0, throughL)).epsilon(1e-6));
    CHECK(ag.S == doctest::Approx(std::min(ag.S_u, ag.S_d)));
    CHECK(ag.S_u == doctest::Approx(0.3551).epsilon(3e-4));
    CHECK(ag.S_d == doctest::Approx(0.5115).epsilon(3e-4));
  }

  TEST_CASE("ellipse paths are mirror images") {
    const CurveModel curve = build_ellipse(4, 3);
    const AgmonData ag = agmon(effective_potential(band_data(constants()), curve));
    CHECK(ag.S_u == doctest::Approx(ag.S_d).epsilon(1e-9));
    CHECK(ag.A_u == doctest::Approx(ag.A_d).epsilon(1e-7));
    CHECK(ag.S == doctest::Approx(1.12746682).epsilon(1e-7));
  }

  TEST_CASE("potential vanishes quadratically at the wells") {
    const CurveModel curve = build_ellipse(2, 1);
    const EffectivePotential v = effective_potential(band_data(constants()), curve);
    CHECK(v.value(curve.s_r) == doctest::Approx(0.0).epsilon(1e-12));
    const double d = 1e-3;
    CHECK(std::sqrt(v.value(curve.s_r + d)) / d == doctest::Approx(v.g).epsilon(1e-4));
    CHECK(v.g_fit == doctest::Approx(v.g).epsilon(1e-3));
  }

  TEST_CASE("prediction is an interference of two paths") {
    const CurveModel curve = build_ellipse(4, 3);
    const double h = 0.01;
    const TunnelingPrediction p = splitting_predict(constants(), curve, 0.0, h);
    CHECK(p.gap_predicted > 0);
    CHECK(p.gamma0 == doctest::Approx(circulation(curve)));
    // |w| <= prefactor (c_u + c_d)
    const double bound = 2.0 * p.prefactor * (p.component_u + p.component_d);
    CHECK(p.gap_predicted <= bound * (1 + 1e-12));
    const TunnelingPrediction q = splitting_predict(constants(), curve, 0.0, h * (1 + 1e-3));
    CHECK(q.S_u == doctest::Approx(p.S_u));
  }

  TEST_CASE("Neumann pathway uses the de Gennes band") {
    const DeGennesConstants dg = de_gennes_constants();
    const BandData b = band_data(dg);
    CHECK(b.provenance == Provenance::Neumann);
    CHECK(b.beta == doctest::Approx(dg.theta0));
    CHECK(b.zeta == doctest::Approx(dg.xi0));
    const TunnelingPrediction p = splitting_predict_neumann(dg, build_ellipse(2, 1), 0.01);
    CHECK(p.gap_predicted > 0);
  }

  TEST_CASE("transversal arc: cosine bump has closed-form action and prefactor") {
    BandData band;
    band.mu_pp = 1.0;
    band.weight = 0.5;  // V = k_max - k
    ArcSpec arc;
    const double sr = 1.5;
    arc.s_r = sr;
    arc.curvature = [sr](double s) { return -std::cos(M_PI * s / sr); };
    const TransversalResult r = splitting_predict_transversal(arc, band, 1e-3);
    CHECK(r.S == doctest::Approx(4 * sr * std::sqrt(2.0) / M_PI).epsilon(1e-8));
    CHECK(r.A == doctest::Approx(4.0).epsilon(1e-5));
    CHECK(r.V0 == doctest::Approx(2.0));

    ArcSpec skew = arc;
    skew.curvature = [sr](double s) { return -std::cos(M_PI * s / sr) + 0.01 * std::sin(M_PI * s / sr); };
    CHECK_THROWS_AS(splitting_predict_transversal(skew, band, 1e-3), Error);
  }
}
