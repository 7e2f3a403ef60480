#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <random>

#include "magstep/lanczos.hpp"
#include "magstep/tridiag.hpp"

using namespace magstep;

namespace {

void random_tridiag(int n, unsigned seed, Eigen::VectorXd& d, Eigen::VectorXd& e) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  d.resize(n);
  e.resize(n - 1);
  for (int i = 0; i < n; ++i) d(i) = 2.0 + u(rng);
  for (int i = 0; i < n - 1; ++i) e(i) = u(rng);
}

Eigen::MatrixXd dense_tridiag(const Eigen::VectorXd& d, const Eigen::VectorXd& e) {
  Eigen::MatrixXd m = d.asDiagonal();
  for (Eigen::Index i = 0; i + 1 < d.size(); ++i) m(i, i + 1) = m(i + 1, i) = e(i);
  return m;
}

}  // namespace

TEST_SUITE("linalg") {
  TEST_CASE("sturm count matches dense spectrum") {
    Eigen::VectorXd d, e;
    random_tridiag(60, 7, d, e);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dense_tridiag(d, e)).eigenvalues();
    for (int k = 0; k < 60; k += 7) {
      CHECK(sturm_count<double>(d, e, ev(k) - 1e-9) == k);
      CHECK(sturm_count<double>(d, e, ev(k) + 1e-9) == k + 1);
    }
  }

  TEST_CASE("bisection reaches dense eigenvalues") {
    Eigen::VectorXd d, e;
    random_tridiag(80, 11, d, e);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dense_tridiag(d, e)).eigenvalues();
    for (int k : {0, 1, 5, 40, 79}) CHECK(tridiag_eigenvalue<double>(d, e, k) == doctest::Approx(ev(k)).epsilon(1e-13));
  }

  TEST_CASE("inverse iteration gives an eigenvector") {
    Eigen::VectorXd d, e;
    random_tridiag(50, 3, d, e);
    const double lam = tridiag_eigenvalue<double>(d, e, 0);
    const Eigen::VectorXd x = inverse_iteration<double>(d, e, lam);
    CHECK((dense_tridiag(d, e) * x - lam * x).norm() < 1e-10);
    CHECK(x.norm() == doctest::Approx(1.0));
  }

  TEST_CASE("periodic solve and count") {
    Eigen::VectorXd d, e;
    random_tridiag(40, 5, d, e);
    const double corner = 0.3;
    Eigen::MatrixXd m = dense_tridiag(d, e);
    m(0, 39) = m(39, 0) = corner;
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
    CHECK(periodic_sturm_count<double>(d, e, corner, ev(3) + 1e-9) == 4);
    CHECK(periodic_eigenvalue<double>(d, e, corner, 2) == doctest::Approx(ev(2)).epsilon(1e-12));
    Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(40, -1, 1);
    const double shift = ev(0) - 0.5;
    const Eigen::VectorXd x = periodic_tridiag_solve<double>(d, e, corner, shift, b);
    CHECK(((m - shift * Eigen::MatrixXd::Identity(40, 40)) * x - b).norm() < 1e-10);
  }

  TEST_CASE("shift-invert Lanczos on a 1D Laplacian") {
    const int n = 400;
    Eigen::SparseMatrix<double> A(n, n);
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i) {
      t.emplace_back(i, i, 2.0);
      if (i + 1 < n) {
        t.emplace_back(i, i + 1, -1.0);
        t.emplace_back(i + 1, i, -1.0);
      }
    }
    A.setFromTriplets(t.begin(), t.end());
    const double shift = -1e-3;
    Eigen::SparseMatrix<double> S = A;
    for (int i = 0; i < n; ++i) S.coeffRef(i, i) -= shift;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(S);
    auto res = shift_invert_lanczos<double>([&](const Eigen::VectorXd& b) { return Eigen::VectorXd(ldlt.solve(b)); },
                                            [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x); }, n,
                                            shift, 3);
    for (int k = 0; k < 3; ++k) {
      const double exact = 2.0 - 2.0 * std::cos((k + 1) * M_PI / (n + 1));
      CHECK(res.values(k) == doctest::Approx(exact).epsilon(1e-10));
    }
  }
}
