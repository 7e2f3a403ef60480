#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "magstep/errors.hpp"

namespace magstep {

struct LanczosOptions {
  int max_iterations = 400;
  int check_every = 10;
  double tol = 1e-11;  // relative residual ||A x - lambda x|| / max(1, |lambda|)
  unsigned seed = 12345;
  bool throw_on_failure = true;  // false: return the last Ritz pairs
};

template <typename Scalar>
struct LanczosResult {
  Eigen::VectorXd values;  // ascending
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;
  Eigen::VectorXd residuals;
  int iterations = 0;
};

namespace detail {

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> start_vector(Eigen::Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if constexpr (std::is_same_v<Scalar, double>)
      v(i) = 1.0 + 0.5 * u(rng);
    else
      v(i) = Scalar(1.0 + 0.5 * u(rng), 0.5 * u(rng));
  }
  return v / v.norm();
}

}  // namespace detail

// Shift-invert Lanczos with full reorthogonalization for a Hermitian operator.
// solve(b) returns (A - shift)^{-1} b; apply(x) returns A x. Returns the nev
// eigenpairs closest to shift.
template <typename Scalar, typename Solve, typename Apply>
LanczosResult<Scalar> shift_invert_lanczos(Solve&& solve, Apply&& apply, Eigen::Index n, double shift,
                                           int nev, const LanczosOptions& opt = {}) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const int max_m = int(std::min<Eigen::Index>(n, opt.max_iterations));
  Mat V(n, max_m + 1);
  std::vector<double> alpha, beta;
  V.col(0) = detail::start_vector<Scalar>(n, opt.seed);
  LanczosResult<Scalar> out;
  int m = 0;
  bool invariant = false;
  while (m < max_m) {
    Vec w = solve(V.col(m));
    const double a = std::real(V.col(m).dot(w));
    alpha.push_back(a);
    // two passes of classical Gram-Schmidt against the whole basis
    for (int pass = 0; pass < 2; ++pass) {
      const Vec c = V.leftCols(m + 1).adjoint() * w;
      w -= V.leftCols(m + 1) * c;
    }
    const double b = w.norm();
    ++m;
    invariant = b < 1e-14 * std::max(1.0, std::abs(a));
    if (!invariant) {
      beta.push_back(b);
      V.col(m) = w / b;
    }
    if (m >= nev && (m % opt.check_every == 0 || invariant || m == max_m)) {
      Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
      // largest |theta| are closest to the shift
      std::vector<int> idx(m);
      for (int i = 0; i < m; ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(), [&](int x, int y) {
        return std::abs(es.eigenvalues()(x)) > std::abs(es.eigenvalues()(y));
      });
      bool ok = true;
      std::vector<std::pair<double, Vec>> pairs;
      Eigen::VectorXd res(nev);
      for (int k = 0; k < nev; ++k) {
        const int i = idx[k];
        const double theta = es.eigenvalues()(i);
        const double lambda = shift + 1.0 / theta;
        Vec x = V.leftCols(m) * es.eigenvectors().col(i).template cast<Scalar>();
        x /= x.norm();
        const double r = (apply(x) - lambda * x).norm() / std::max(1.0, std::abs(lambda));
        res(k) = r;
        if (r > opt.tol) ok = false;
        pairs.emplace_back(lambda, std::move(x));
      }
      if (ok || invariant || m == max_m) {
        std::vector<int> ord(nev);
        for (int k = 0; k < nev; ++k) ord[k] = k;
        std::sort(ord.begin(), ord.end(), [&](int x, int y) { return pairs[x].first < pairs[y].first; });
        out.values.resize(nev);
        out.vectors.resize(n, nev);
        out.residuals.resize(nev);
        for (int k = 0; k < nev; ++k) {
          out.values(k) = pairs[ord[k]].first;
          out.vectors.col(k) = pairs[ord[k]].second;
          out.residuals(k) = res(ord[k]);
        }
        out.iterations = m;
        if (!ok && opt.throw_on_failure)
          throw Error(ErrorCode::ConvergenceFailure,
                      "Lanczos did not converge in " + std::to_string(m) + " steps (residual " +
                          std::to_string(res.maxCoeff()) + ")");
        return out;
      }
    }
    if (invariant) break;
  }
  throw Error(ErrorCode::ConvergenceFailure, "Lanczos basis exhausted");
}

}  // namespace magstep
