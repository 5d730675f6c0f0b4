#include "dissect/basis.hpp"

#include <cmath>
#include <numbers>

#include "dissect/error.hpp"

namespace dissect {

double legendre(int n, double x) {
  if (n == 0) return 1.0;
  double p_prev = 1.0;
  double p = x;
  for (int k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
    p_prev = p;
    p = next;
  }
  return p;
}

GaussRule gauss_legendre(int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "gauss rule needs at least one point");
  GaussRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const double pn = legendre(n, x);
      const double pn1 = legendre(n - 1, x);
      const double dp = n * (x * pn - pn1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double pn1 = legendre(n - 1, x);
    const double dp = n * (x * legendre(n, x) - pn1) / (x * x - 1.0);
    rule.points[n - 1 - i] = x;
    rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

double hierarchic(int mode, double x) {
  if (mode == 0) return 0.5 * (1.0 - x);
  if (mode == 1) return 0.5 * (1.0 + x);
  return (legendre(mode, x) - legendre(mode - 2, x)) / std::sqrt(2.0 * (2.0 * mode - 1.0));
}

double hierarchic_derivative(int mode, double x) {
  if (mode == 0) return -0.5;
  if (mode == 1) return 0.5;
  return std::sqrt((2.0 * mode - 1.0) / 2.0) * legendre(mode - 1, x);
}

}  // namespace dissect
