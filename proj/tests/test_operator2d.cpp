#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "magstep/moments.hpp"
#include "magstep/operator2d.hpp"
#include "magstep/tunneling.hpp"

using namespace magstep;

namespace {

const EdgeConstants& constants() {
  static const EdgeConstants c = edge_constants(-0.5);
  return c;
}

const CurveModel& ellipse43() {
  static const CurveModel c = build_ellipse(4, 3);
  return c;
}

StripGrid tiny_grid() {
  StripGrid g;
  g.n_sigma = 24;
  g.n_tau = 32;
  g.tau_half_width = 8;
  return g;
}

}  // namespace

TEST_SUITE("operator2d") {
  TEST_CASE("cutoff profile") {
    CHECK(cutoff(0.0) == 1.0);
    CHECK(cutoff(1.0) == 1.0);
    CHECK(cutoff(2.0) == 0.0);
    CHECK(cutoff(-2.5) == 0.0);
    CHECK(cutoff(1.5) == doctest::Approx(0.5));
    const double d = 1e-6;
    CHECK(cutoff_d1(1.3) == doctest::Approx((cutoff(1.3 + d) - cutoff(1.3 - d)) / (2 * d)).epsilon(1e-6));
  }

  TEST_CASE("flat strip reproduces the fiber band") {
    StripSpec s;
    s.a = -0.5;
    s.zeta = constants().zeta_a;
    s.hbar = 0.1;
    s.gamma0 = 1.7;
    s.box_start = -5;
    s.box_length = 10;
    s.k = [](double) { return 0.0; };
    s.dk = [](double) { return 0.0; };
    StripGrid g;
    g.n_sigma = 16;
    g.tau_half_width = 12;
    g.tau_spacing = 0.1;
    WeightedOperator2D op = assemble_strip(s, g);
    op.shift_hint = constants().beta_a - 0.01;
    const EigenResult r = lowest_eigs(op, 1);
    CHECK(r.values(0) == doctest::Approx(fiber_band_minimum(op)).epsilon(1e-10));
    CHECK(std::abs(r.values(0) - constants().beta_a) < 1e-3);
  }

  TEST_CASE("assembled matrix is Hermitian and apply agrees with the sparse form") {
    const WeightedOperator2D op = assemble_full(constants(), ellipse43(), 0.2, 0.125, tiny_grid());
    CHECK(op.hermitian_defect() == 0.0);
    const Eigen::SparseMatrix<cplx> S = op.sparse();
    Eigen::VectorXcd x(op.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = cplx(std::sin(0.1 * i), std::cos(0.3 * i));
    CHECK((op.apply(x) - S * x).norm() < 1e-12 * x.norm() * S.norm());
    const Eigen::MatrixXcd D = op.dense();
    CHECK((D - D.adjoint()).norm() == 0.0);
  }

  TEST_CASE("Lanczos agrees with the dense oracle on the tiny grid") {
    const WeightedOperator2D op = assemble_full(constants(), ellipse43(), 0.2, 0.125, tiny_grid());
    const EigenResult it = lowest_eigs(op, 4);
    const Eigen::VectorXd dense = dense_eigs(op, 4);
    CHECK((it.values - dense).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(it.residuals(i) < 1e-9);
  }

  TEST_CASE("left and right single wells are mirror images") {
    const double hb = 0.1;
    const auto r = lowest_eigs(assemble_single_well(constants(), ellipse43(), WellSide::Right, hb, 0.125, {}), 1);
    const auto l = lowest_eigs(assemble_single_well(constants(), ellipse43(), WellSide::Left, hb, 0.125, {}), 1);
    CHECK(std::abs(r.values(0) - l.values(0)) < 1e-10);
  }

  TEST_CASE("flux is removable on a single well") {
    const double hb = 0.05;
    const auto with = lowest_eigs(assemble_single_well(constants(), ellipse43(), WellSide::Right, hb, 0.125, {}, true), 1);
    const auto without =
        lowest_eigs(assemble_single_well(constants(), ellipse43(), WellSide::Right, hb, 0.125, {}, false), 1);
    CHECK(std::abs(with.values(0) - without.values(0)) < 1e-10);
  }

  TEST_CASE("gauge shift by a flux quantum leaves the spectrum unchanged") {
    const double hb = 0.2;
    const double L = ellipse43().half_length;
    StripGrid g = tiny_grid();
    const Eigen::VectorXd base = dense_eigs(assemble_full(constants(), ellipse43(), hb, 0.125, g), 3);
    for (int m : {1, -2}) {
      const double shift = hb * hb * M_PI * m / L;
      const Eigen::VectorXd moved = dense_eigs(assemble_full(constants(), ellipse43(), hb, 0.125, g, shift), 3);
      CHECK((moved - base).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("ground level is monotone under tau refinement") {
    double prev = 0;
    int k = 0;
    for (double dt : {0.16, 0.11, 0.08}) {
      StripGrid g;
      g.tau_spacing = dt;
      const double nu =
          lowest_eigs(assemble_single_well(constants(), ellipse43(), WellSide::Right, 0.05, 0.125, g), 1).values(0);
      if (k++ > 0) CHECK(nu < prev);
      prev = nu;
    }
  }

  TEST_CASE("ground state is localized") {
    const auto r = lowest_eigs(assemble_single_well(constants(), ellipse43(), WellSide::Right, 0.05, 0.125, {}), 1);
    CHECK(r.tail_mass < 1e-6);
    const auto e = lowest_eigs(assemble_full(constants(), build_ellipse(2, 1), 0.02, 0.125, {}), 1);
    CHECK(e.tail_mass < 1e-6);
  }

  TEST_CASE("weight guard") {
    try {
      assemble_full(constants(), build_ellipse(2, 1), 0.15, 0.125, {});
      FAIL("expected a weight failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::WeightNotPositive);
    }
  }

  TEST_CASE("single-well extension keeps the well") {
    const WellExtension ext = extend_curvature(ellipse43(), WellSide::Right);
    CHECK(ext.k_max == doctest::Approx(ellipse43().k_max).epsilon(1e-12));
    CHECK(ext.secondary_max < ext.k_max);
    CHECK(ext.k(ellipse43().s_r) == doctest::Approx(ellipse43().k_max));
    CHECK(ext.k(ext.box_start + 1e-3) == 0.0);
  }

  TEST_CASE("AHK fit needs a spread of hbar") {
    CHECK_THROWS_AS(ahk_coefficient_fit(constants(), ellipse43(), {0.01, 0.011, 0.012}, 0.125, {}), Error);
  }

  TEST_CASE("half-period symmetry") {
    CHECK(half_period_symmetric(ellipse43()));
    CHECK_FALSE(half_period_symmetric(build_fourier_curve(1.0, {{2, -0.1}, {3, 0.02}})));
  }

  TEST_CASE("parity classes split the full spectrum") {
    StripGrid g = tiny_grid();
    const Eigen::VectorXd all = dense_eigs(assemble_full(constants(), ellipse43(), 0.2, 0.125, g), 2);
    g.parity = ModeParity::Even;
    const double even = dense_eigs(assemble_full(constants(), ellipse43(), 0.2, 0.125, g), 1)(0);
    g.parity = ModeParity::Odd;
    const double odd = dense_eigs(assemble_full(constants(), ellipse43(), 0.2, 0.125, g), 1)(0);
    CHECK(std::min(even, odd) == doctest::Approx(all(0)).epsilon(1e-9));
    CHECK(std::max(even, odd) == doctest::Approx(all(1)).epsilon(1e-9));
  }

  TEST_CASE("envelope within a factor two of the prediction") {
    const EnvelopeRow r = gap_envelope(constants(), ellipse43(), 0.01, 0.125, {});
    const double ratio = r.envelope / r.predicted;
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
  }

  TEST_CASE("doublet is degenerate at an interference zero") {
    const CurveModel& c = ellipse43();
    auto signed_gap = [&](double inv_h) { return gap_2d(constants(), c, 1.0 / std::sqrt(inv_h), 0.125, {}).signed_gap; };
    double x0 = 100.10, x1 = 100.20;
    double f0 = signed_gap(x0), f1 = signed_gap(x1);
    REQUIRE(f0 * f1 < 0);
    const double scale = std::max(std::abs(f0), std::abs(f1));
    for (int it = 0; it < 4; ++it) {
      const double x = x1 - f1 * (x1 - x0) / (f1 - f0);
      const double f = signed_gap(x);
      if (f * f1 < 0) {
        x0 = x1;
        f0 = f1;
      } else {
        f0 *= 0.5;
      }
      x1 = x;
      f1 = f;
    }
    CHECK(std::abs(f1) < 1e-3 * scale);
    CHECK(x1 == doctest::Approx(100.1505).epsilon(2e-6));
  }

  TEST_CASE("COO export") {
    const WeightedOperator2D op = assemble_full(constants(), ellipse43(), 0.2, 0.125, tiny_grid());
    const auto path = std::filesystem::temp_directory_path() / "magstep_test.coo";
    write_coo(op, path.string());
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string pct, kind, field, sym;
    long rows = 0, cols = 0, nnz = 0;
    hs >> pct >> kind >> field >> sym >> rows >> cols >> nnz;
    CHECK(pct == "%");
    CHECK(field == "complex");
    CHECK(rows == op.size());
    CHECK(cols == op.size());
    CHECK(nnz == op.sparse().nonZeros());
    long r, c;
    double re, im;
    long count = 0;
    double herm = 0;
    const Eigen::MatrixXcd D = op.dense();
    while (in >> r >> c >> re >> im) {
      ++count;
      herm = std::max(herm, std::abs(D(r, c) - cplx(re, im)));
    }
    CHECK(count == nnz);
    CHECK(herm < 1e-14 * D.cwiseAbs().maxCoeff());
    std::filesystem::remove(path);
  }
}
