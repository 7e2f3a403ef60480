#include <iomanip>
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "magstep/geometry.hpp"

using namespace magstep;

namespace {

// Ramanujan's second perimeter approximation.
double ellipse_perimeter(double a, double b) {
  const double h = std::pow((a - b) / (a + b), 2);
  return M_PI * (a + b) * (1 + 3 * h / (10 + std::sqrt(4 - 3 * h)));
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("ellipse arclength, area and wells") {
    const CurveModel c = build_ellipse(4, 3);
    CHECK(c.length() == doctest::Approx(ellipse_perimeter(4, 3)).epsilon(1e-9));
    CHECK(c.area == doctest::Approx(12 * M_PI).epsilon(1e-9));
    CHECK(c.k_max == doctest::Approx(4.0 / 9.0).epsilon(1e-9));
    // k'' at the vertex in arclength: -3 a (a^2 - b^2) / b^6
    CHECK(c.k2 == doctest::Approx(-3.0 * 4 * 7 / std::pow(3.0, 6)).epsilon(1e-6));
    CHECK(c.s_r == doctest::Approx(c.half_length / 2).epsilon(1e-9));
    CHECK(std::abs(std::abs(c.s_ell) - c.half_length / 2) < 1e-9);
    CHECK(circulation(c) == doctest::Approx(12 * M_PI / ellipse_perimeter(4, 3)).epsilon(1e-9));
  }

  TEST_CASE("curvature integrates to 2 pi") {
    const CurveModel c = build_ellipse(2, 1);
    const double h = c.s_nodes(1) - c.s_nodes(0);
    CHECK(c.k_samples.sum() * h == doctest::Approx(2 * M_PI).epsilon(1e-10));
  }

  TEST_CASE("curvature is even about the axis points") {
    const CurveModel c = build_fourier_curve(1.0, {{2, -0.1}, {3, 0.02}});
    for (double s : {0.1, 0.7, 1.9}) {
      CHECK(c.curvature(s) == doctest::Approx(c.curvature(-s)).epsilon(1e-9));
      CHECK(c.curvature(c.half_length + s) == doctest::Approx(c.curvature(c.half_length - s)).epsilon(1e-9));
    }
    CHECK(c.curvature(c.s_r) == doctest::Approx(c.k_max).epsilon(1e-10));
    CHECK(c.curvature_d1(c.s_r) == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(c.curvature_d2(c.s_r) == doctest::Approx(c.k2).epsilon(1e-6));
  }

  TEST_CASE("degenerate and single-well curves are rejected") {
    CHECK_THROWS_AS(build_ellipse(1, 1), Error);
    CHECK_THROWS_AS(build_fourier_curve(1.0, {}), Error);
    try {
      build_fourier_curve(1.0, {{2, 0.1}, {3, 0.02}});
      FAIL("expected a well failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::WellValidationFailed);
    }
    CHECK_THROWS_AS(build_fourier_curve(1.0, {{2, 1.5}}), Error);
  }

  TEST_CASE("rigid motions leave the curvature unchanged") {
    const CurveModel a = build_ellipse(3, 2);
    const CurveModel b = build_curve(CurveKind::Custom, {}, rigid_motion(ellipse_curve(3, 2), 0.7, 1.5, -2.0));
    CHECK(b.half_length == doctest::Approx(a.half_length).epsilon(1e-10));
    for (double s : {0.0, 0.4, 2.2, -1.3}) CHECK(b.curvature(s) == doctest::Approx(a.curvature(s)).epsilon(1e-8));
  }

  TEST_CASE("tabulated ellipse from a CSV file") {
    // interpolation error shrinks with the table spacing
    auto build = [](int count) {
      const auto path = std::filesystem::temp_directory_path() / "magstep_ellipse.csv";
      {
        std::ofstream out(path);
        out << "# x,y\n";
        for (int i = 0; i < count; ++i) {
          const double t = 2 * M_PI * i / count;
          out << std::setprecision(17) << 2 * std::cos(t) << "," << std::sin(t) << "\n";
        }
      }
      CurveModel c = build_tabulated(read_curve_csv(path.string()));
      std::filesystem::remove(path);
      return c;
    };
    const CurveModel c1 = build(400), c2 = build(1600);
    const double e1 = std::abs(c1.k_max - 2.0), e2 = std::abs(c2.k_max - 2.0);
    CHECK(e1 < 5e-4);
    CHECK(e2 < e1 / 2);
    CHECK(c1.length() == doctest::Approx(ellipse_perimeter(2, 1)).epsilon(1e-5));
    CHECK(c2.length() == doctest::Approx(ellipse_perimeter(2, 1)).epsilon(1e-7));
  }
}
