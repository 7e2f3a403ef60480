#pragma once

#include <cmath>

namespace magstep {

// Composite 8-point Gauss-Legendre on [a, b].
template <typename F>
double gauss_legendre(F&& f, double a, double b, int panels) {
  static constexpr double x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                  -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                  0.7966664774136267,  0.9602898564975363};
  static constexpr double w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                  0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                  0.2223810344533745, 0.1012285362903763};
  const double h = (b - a) / panels;
  double sum = 0;
  for (int p = 0; p < panels; ++p) {
    const double m = a + (p + 0.5) * h;
    double s = 0;
    for (int i = 0; i < 8; ++i) s += w[i] * f(m + 0.5 * h * x[i]);
    sum += s * 0.5 * h;
  }
  return sum;
}

// Panel-doubling estimate: returns the fine value, err gets |fine - coarse|.
template <typename F>
double gauss_legendre_checked(F&& f, double a, double b, int panels, double& err) {
  const double coarse = gauss_legendre(f, a, b, panels);
  const double fine = gauss_legendre(f, a, b, 2 * panels);
  err = std::abs(fine - coarse);
  return fine;
}

}  // namespace magstep
