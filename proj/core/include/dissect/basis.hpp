#pragma once

#include <vector>

namespace dissect {

struct GaussRule {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Gauss-Legendre rule with n points on [-1, 1]; exact for degree 2n-1.
GaussRule gauss_legendre(int n);

/// Legendre polynomial P_n at x.
double legendre(int n, double x);

// One-dimensional hierarchic basis of degree p on [-1, 1].
//   mode 0: (1 - x) / 2        mode 1: (1 + x) / 2
//   mode j >= 2: (P_j - P_{j-2}) / sqrt(2(2j - 1)), the integrated Legendre
//   polynomial of P_{j-1}; it vanishes at both ends.
double hierarchic(int mode, double x);
double hierarchic_derivative(int mode, double x);

}  // namespace dissect
