#include "magstep/fit.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

#include "magstep/errors.hpp"

namespace magstep {

LinearFit least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
  if (A.rows() < A.cols() || A.rows() != y.size())
    throw Error(ErrorCode::FitIllConditioned, "not enough samples for the fit");
  // column scaling before the conditioning check
  Eigen::VectorXd scale = A.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (scale(j) == 0) throw Error(ErrorCode::FitIllConditioned, "zero column in design matrix");
  const Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(As);
  const auto& sv = svd.singularValues();
  LinearFit f;
  f.condition = sv(0) / sv(sv.size() - 1);
  if (!(f.condition < 1e12)) throw Error(ErrorCode::FitIllConditioned, "design matrix is rank deficient");
  f.coef = As.colPivHouseholderQr().solve(y).cwiseQuotient(scale);
  f.rms = std::sqrt((A * f.coef - y).squaredNorm() / double(y.size()));
  return f;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const Eigen::Index n = Eigen::Index(x.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = std::log(x[i]);
    b(i) = std::log(y[i]);
  }
  return least_squares(A, b).coef(1);
}

}  // namespace magstep
