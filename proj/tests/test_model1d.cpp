#include <doctest.h>

#include <cmath>

#include "magstep/model1d.hpp"
#include "magstep/moments.hpp"

using namespace magstep;

TEST_SUITE("model1d") {
  TEST_CASE("whole-line grid is symmetric with a node at zero") {
    const Grid1D g = Grid1D::whole_line(5.0, 0.25);
    CHECK(g.n_points == 41);
    CHECK(g.nodes(g.zero_index()) == 0.0);
    for (Index i = 0; i < g.n_points; ++i) CHECK(g.nodes(i) == -g.nodes(g.n_points - 1 - i));
    CHECK(g.spacing() == doctest::Approx(0.25));
  }

  TEST_CASE("uniform field reduces to the harmonic oscillator") {
    const Grid1D g = Grid1D::whole_line(12.0, 0.005);
    for (double xi : {0.0, -0.7, 1.3}) CHECK(fiber_eigenvalue(1.0, xi, g) == doctest::Approx(1.0).epsilon(1e-5));
  }

  TEST_CASE("de Gennes constant against the literature value") {
    const DeGennesConstants dg = de_gennes_constants();
    CHECK(std::abs(dg.theta0 - 0.590106125) < 1e-5);
    CHECK(std::abs(dg.xi0 + std::sqrt(dg.theta0)) < 1e-4);
    CHECK(dg.mu_pp > 0);
  }

  TEST_CASE("step ratio a = -1 is the de Gennes problem") {
    const FiberConfig cfg;
    const DeGennesConstants dg = de_gennes_constants(cfg);
    const auto [zeta, beta] = band_minimize(-1.0, cfg);
    CHECK(std::abs(beta - dg.theta0) < 1e-5);
    CHECK(std::abs(zeta - dg.xi0) < 1e-4);
  }

  TEST_CASE("frozen constants at a = -0.5") {
    const EdgeConstants c = edge_constants(-0.5);
    CHECK(c.zeta_a == doctest::Approx(-0.66431285).epsilon(2e-7));
    CHECK(c.beta_a == doctest::Approx(0.39123759).epsilon(2e-7));
    CHECK(c.mu_pp == doctest::Approx(0.99672448).epsilon(2e-6));
    CHECK(c.m3 == doctest::Approx(-0.0371734306).epsilon(1e-6));
  }

  TEST_CASE("fiber ground state is normalized, positive and stationary") {
    const FiberConfig cfg;
    const auto [zeta, beta] = band_minimize(-0.25, cfg);
    const FiberSolution s = solve_fiber(-0.25, zeta, cfg.whole_grid());
    CHECK(s.mu == doctest::Approx(beta).epsilon(1e-10));
    double mass = 0;
    const double h = s.grid.spacing();
    for (Index i = 0; i < s.phi.size(); ++i) {
      CHECK(s.phi(i) >= -1e-14);
      mass += s.phi(i) * s.phi(i) * h;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(band_slope(s)) < 1e-6);
  }

  TEST_CASE("band bounds hold across field ratios") {
    const double theta0 = de_gennes_constants().theta0;
    for (double a : {-0.9, -0.6, -0.3, -0.1}) {
      const auto [zeta, beta] = band_minimize(a, FiberConfig{});
      CHECK(zeta < 0);
      CHECK(std::abs(a) * theta0 < beta);
      CHECK(beta < std::min(std::abs(a), theta0));
    }
  }

  TEST_CASE("narrow grids are rejected") {
    FiberConfig cfg;
    cfg.half_width = 2.0;
    CHECK_THROWS_AS(solve_fiber(-0.5, -0.66, cfg.whole_grid()), Error);
  }
}
