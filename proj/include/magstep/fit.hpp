#pragma once

#include <Eigen/Core>
#include <vector>

namespace magstep {

struct LinearFit {
  Eigen::VectorXd coef;
  double rms = 0;
  double condition = 0;
};

// Least squares y ~ A coef (column-pivoted QR). Throws FitIllConditioned when
// the scaled design matrix is numerically rank deficient.
LinearFit least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& y);

// Slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace magstep
