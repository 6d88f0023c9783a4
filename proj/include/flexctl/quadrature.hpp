#pragma once

#include <vector>

namespace flexctl {

/// Rule on the reference triangle {(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}.
/// Points are given as (ξ, η); the barycentric triple is (1 − ξ − η, ξ, η).
/// Weights sum to the reference area 1/2.
struct QuadratureRule {
  struct Point {
    double xi;
    double eta;
  };
  std::vector<Point> points;
  std::vector<double> weights;
  int degree = 0;
};

/// Smallest available rule exact for bivariate polynomials of total degree
/// `degree`. Degrees up to 5 use the 7-point Radon rule; higher degrees use a
/// collapsed Gauss–Legendre product rule. Supported range: 1..30.
QuadratureRule quadrature_rule(int degree);

/// Gauss–Legendre rule on [0, 1] with n points (exact to degree 2n − 1).
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};
LineRule gauss_legendre(int n);

}  // namespace flexctl
