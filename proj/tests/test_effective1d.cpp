#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "magstep/effective1d.hpp"
#include "magstep/moments.hpp"

using namespace magstep;

namespace {

const EffectivePotential& ellipse21() {
  static const EffectivePotential v = effective_potential(band_data(edge_constants(-0.5)), build_ellipse(2, 1));
  return v;
}

}  // namespace

TEST_SUITE("effective1d") {
  TEST_CASE("symmetric doublet agrees with a dense solve") {
    const PeriodicOperator1D op = assemble(ellipse21(), 0.05, 512);
    CHECK(op.reflection_symmetric);
    const LowestPair p = lowest_pair(op);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(op.dense()).eigenvalues();
    CHECK(p.nu1 == doctest::Approx(ev(0)).epsilon(1e-11));
    CHECK(p.nu2 == doctest::Approx(ev(1)).epsilon(1e-11));
    CHECK(p.gap == doctest::Approx(ev(1) - ev(0)).epsilon(1e-7));
    const Eigen::VectorXd low = lowest_eigenvalues(op, 3);
    CHECK(low(2) == doctest::Approx(ev(2)).epsilon(1e-11));
  }

  TEST_CASE("apply matches the dense matrix") {
    const PeriodicOperator1D op = assemble(ellipse21(), 0.01, 256);
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(256, -1, 2).array().sin();
    CHECK((op.apply(x) - op.dense() * x).norm() < 1e-12 * x.norm() * op.dense().norm());
  }

  TEST_CASE("gap shrinks as h decreases") {
    double last = INFINITY;
    for (double h : {0.05, 0.02, 0.01, 0.005}) {
      const LowestPair p = lowest_pair(assemble(ellipse21(), h, 2048));
      CHECK(p.gap > 0);
      CHECK(p.gap < last);
      last = p.gap;
    }
  }

  TEST_CASE("exponent window sweep spacing") {
    const auto hs = exponent_window_sweep(1.5, 30, 90, 5);
    REQUIRE(hs.size() == 5);
    CHECK(1.5 / std::pow(hs.front(), 0.25) == doctest::Approx(90));
    CHECK(1.5 / std::pow(hs.back(), 0.25) == doctest::Approx(30));
    const double r = (1.5 / std::pow(hs[1], 0.25)) / (1.5 / std::pow(hs[0], 0.25));
    CHECK((1.5 / std::pow(hs[3], 0.25)) / (1.5 / std::pow(hs[2], 0.25)) == doctest::Approx(r));
    const auto g = geometric_sweep(0.002, 0.05, 3);
    CHECK(g[1] == doctest::Approx(std::sqrt(0.002 * 0.05)));
  }

  TEST_CASE("exponent fit on a short window") {
    const AgmonData ag = agmon(ellipse21());
    GapFitOptions o;
    o.n = 2048;
    const GapFit f = gap_exponent_fit(ellipse21(), exponent_window_sweep(ag.S, 30, 60, 6), o);
    CHECK(std::abs(f.S_fit - ag.S) / ag.S < 0.05);
    for (const auto& r : f.rows) CHECK(r.used);
  }

  TEST_CASE("unresolvable sweeps are reported") {
    GapFitOptions o;
    o.max_exponent = 1.0;
    CHECK_THROWS_AS(gap_exponent_fit(ellipse21(), {1e-3, 2e-3, 3e-3}, o), Error);
  }

  TEST_CASE("harmonic ladder in the right well") {
    const EffectivePotential v = effective_potential(band_data(edge_constants(-0.5)), build_ellipse(4, 3));
    // anharmonic error decays like h^(1/4)
    const HarmonicReport r6 = harmonic_levels_check(v, 1e-6, 3);
    const HarmonicReport r10 = harmonic_levels_check(v, 1e-10, 3);
    CHECK(r10.spacing_ratio == doctest::Approx(2.0).epsilon(0.02));
    CHECK(r10.spacing / r10.spacing_expected == doctest::Approx(1.0).epsilon(0.02));
    const double e6 = std::abs(r6.spacing / r6.spacing_expected - 1);
    const double e10 = std::abs(r10.spacing / r10.spacing_expected - 1);
    CHECK(e6 / e10 == doctest::Approx(10.0).epsilon(0.2));
  }
}
