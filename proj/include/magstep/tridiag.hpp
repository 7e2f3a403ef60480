#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "magstep/errors.hpp"

namespace magstep {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Number of eigenvalues strictly below x of the symmetric tridiagonal matrix
// with diagonal d and off-diagonal e (Sturm count via LDL^T pivots).
template <typename Scalar>
Eigen::Index sturm_count(const Vec<Scalar>& d, const Vec<Scalar>& e, Scalar x) {
  const Eigen::Index n = d.size();
  const Scalar tiny = std::numeric_limits<Scalar>::min() / std::numeric_limits<Scalar>::epsilon();
  Eigen::Index count = 0;
  Scalar p = d(0) - x;
  if (p < 0) ++count;
  for (Eigen::Index i = 1; i < n; ++i) {
    if (std::abs(p) < tiny) p = -tiny;
    p = d(i) - x - e(i - 1) * e(i - 1) / p;
    if (p < 0) ++count;
  }
  return count;
}

// Sturm count for a symmetric tridiagonal matrix with an extra corner entry
// coupling rows 0 and n-1 (periodic stencil). The last row is treated as a
// border; inertia = inertia(T) + sign of the Schur complement.
template <typename Scalar>
Eigen::Index periodic_sturm_count(const Vec<Scalar>& d, const Vec<Scalar>& e, Scalar corner,
                                  Scalar x) {
  const Eigen::Index n = d.size();
  const Eigen::Index m = n - 1;
  const Scalar tiny = std::numeric_limits<Scalar>::min() / std::numeric_limits<Scalar>::epsilon();
  auto border = [&](Eigen::Index i) {
    Scalar v = 0;
    if (i == 0) v += corner;
    if (i == m - 1) v += e(m - 1);
    return v;
  };
  Eigen::Index count = 0;
  Scalar p = d(0) - x;
  if (std::abs(p) < tiny) p = -tiny;
  Scalar y = border(0);
  Scalar schur = y * y / p;
  if (p < 0) ++count;
  for (Eigen::Index i = 1; i < m; ++i) {
    const Scalar l = e(i - 1) / p;
    p = d(i) - x - l * e(i - 1);
    if (std::abs(p) < tiny) p = -tiny;
    y = border(i) - l * y;
    schur += y * y / p;
    if (p < 0) ++count;
  }
  if (d(m) - x - schur < 0) ++count;
  return count;
}

template <typename Scalar>
void gershgorin(const Vec<Scalar>& d, const Vec<Scalar>& e, Scalar corner, Scalar& lo, Scalar& hi) {
  const Eigen::Index n = d.size();
  lo = std::numeric_limits<Scalar>::max();
  hi = std::numeric_limits<Scalar>::lowest();
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar r = 0;
    if (i > 0) r += std::abs(e(i - 1));
    if (i + 1 < n) r += std::abs(e(i));
    if (i == 0 || i == n - 1) r += std::abs(corner);
    lo = std::min(lo, d(i) - r);
    hi = std::max(hi, d(i) + r);
  }
}

// k-th smallest eigenvalue (k = 0 is the lowest) by bisection on a counting
// function. tol is absolute.
template <typename Scalar, typename Count>
Scalar bisect_eigenvalue(Count&& count, Eigen::Index k, Scalar lo, Scalar hi, Scalar tol) {
  for (int it = 0; it < 400 && hi - lo > tol; ++it) {
    const Scalar mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) break;
    if (count(mid) > k)
      hi = mid;
    else
      lo = mid;
  }
  return lo + (hi - lo) / 2;
}

template <typename Scalar>
Scalar tridiag_eigenvalue(const Vec<Scalar>& d, const Vec<Scalar>& e, Eigen::Index k,
                          Scalar tol = Scalar(0)) {
  Scalar lo, hi;
  gershgorin<Scalar>(d, e, Scalar(0), lo, hi);
  const Scalar scale = std::max(std::abs(lo), std::abs(hi));
  if (tol <= 0) tol = 4 * std::numeric_limits<Scalar>::epsilon() * scale;
  return bisect_eigenvalue<Scalar>([&](Scalar x) { return sturm_count<Scalar>(d, e, x); }, k,
                                   lo, hi, tol);
}

template <typename Scalar>
Scalar periodic_eigenvalue(const Vec<Scalar>& d, const Vec<Scalar>& e, Scalar corner,
                           Eigen::Index k, Scalar tol = Scalar(0)) {
  Scalar lo, hi;
  gershgorin<Scalar>(d, e, corner, lo, hi);
  const Scalar scale = std::max(std::abs(lo), std::abs(hi));
  if (tol <= 0) tol = 4 * std::numeric_limits<Scalar>::epsilon() * scale;
  return bisect_eigenvalue<Scalar>(
      [&](Scalar x) { return periodic_sturm_count<Scalar>(d, e, corner, x); }, k, lo, hi, tol);
}

// Solve (T - shift) x = b for tridiagonal T by Gaussian elimination with
// partial pivoting (second superdiagonal fill).
template <typename Scalar>
Vec<Scalar> tridiag_solve(const Vec<Scalar>& d, const Vec<Scalar>& e, Scalar shift,
                          const Vec<Scalar>& b) {
  const Eigen::Index n = d.size();
  Vec<Scalar> dd = d.array() - shift;
  Vec<Scalar> dl = e, du = e, du2 = Vec<Scalar>::Zero(std::max<Eigen::Index>(n - 2, 0));
  Vec<Scalar> x = b;
  const Scalar tiny = std::numeric_limits<Scalar>::epsilon() *
                      std::max<Scalar>(dd.cwiseAbs().maxCoeff(), Scalar(1)) *
                      std::numeric_limits<Scalar>::epsilon();
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (std::abs(dd(i)) >= std::abs(dl(i))) {
      if (std::abs(dd(i)) < tiny) dd(i) = tiny;
      const Scalar f = dl(i) / dd(i);
      dd(i + 1) -= f * du(i);
      x(i + 1) -= f * x(i);
      dl(i) = f;
      if (i + 2 < n) du2(i) = 0;
    } else {
      const Scalar f = dd(i) / dl(i);
      dd(i) = dl(i);
      dl(i) = f;
      Scalar tmp = du(i);
      du(i) = dd(i + 1);
      dd(i + 1) = tmp - f * dd(i + 1);
      if (i + 2 < n) {
        du2(i) = du(i + 1);
        du(i + 1) = -f * du(i + 1);
      }
      std::swap(x(i), x(i + 1));
      x(i + 1) -= f * x(i);
    }
  }
  if (std::abs(dd(n - 1)) < tiny) dd(n - 1) = tiny;
  x(n - 1) /= dd(n - 1);
  if (n > 1) x(n - 2) = (x(n - 2) - du(n - 2) * x(n - 1)) / dd(n - 2);
  for (Eigen::Index i = n - 3; i >= 0; --i)
    x(i) = (x(i) - du(i) * x(i + 1) - du2(i) * x(i + 2)) / dd(i);
  return x;
}

// Eigenvector for a converged eigenvalue by inverse iteration. Returned with
// unit Euclidean norm and nonnegative sum.
template <typename Scalar>
Vec<Scalar> inverse_iteration(const Vec<Scalar>& d, const Vec<Scalar>& e, Scalar lambda,
                              int iterations = 3) {
  const Eigen::Index n = d.size();
  Vec<Scalar> x = Vec<Scalar>::Ones(n) / std::sqrt(Scalar(n));
  for (int it = 0; it < iterations; ++it) {
    x = tridiag_solve<Scalar>(d, e, lambda, x);
    x /= x.norm();
  }
  if (x.sum() < 0) x = -x;
  return x;
}

// Solve (T + corner coupling - shift) x = b for the periodic stencil
// (cyclic reduction by a rank-one correction).
template <typename Scalar>
Vec<Scalar> periodic_tridiag_solve(const Vec<Scalar>& d, const Vec<Scalar>& e, Scalar corner,
                                   Scalar shift, const Vec<Scalar>& b) {
  const Eigen::Index n = d.size();
  const Scalar gamma = -(d(0) - shift);
  Vec<Scalar> dd = d;
  dd(0) -= gamma;
  dd(n - 1) -= corner * corner / gamma;
  Vec<Scalar> u = Vec<Scalar>::Zero(n);
  u(0) = gamma;
  u(n - 1) = corner;
  const Vec<Scalar> y = tridiag_solve<Scalar>(dd, e, shift, b);
  const Vec<Scalar> z = tridiag_solve<Scalar>(dd, e, shift, u);
  const Scalar vy = y(0) + corner / gamma * y(n - 1);
  const Scalar vz = z(0) + corner / gamma * z(n - 1);
  return y - (vy / (Scalar(1) + vz)) * z;
}

}  // namespace magstep
