#include "flexctl/quadrature.hpp"

#include "flexctl/error.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace flexctl {

namespace {

// (P_n(x), P_{n-1}(x)) by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return {p1, p0};
}

}  // namespace

LineRule gauss_legendre(int n) {
  if (n < 1) throw ArgumentError("gauss_legendre: need at least one point");
  LineRule rule;
  rule.points.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [pn, pm] = legendre(n, x);
      const double dx = pn / (n * (x * pn - pm) / (x * x - 1.0));
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [pn, pm] = legendre(n, x);
    const double dp = n * (x * pn - pm) / (x * x - 1.0);
    // map [-1, 1] -> [0, 1], ascending
    const auto k = static_cast<std::size_t>(n - 1 - i);
    rule.points[k] = 0.5 * (x + 1.0);
    rule.weights[k] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

QuadratureRule quadrature_rule(int degree) {
  if (degree < 1 || degree > 30) {
    throw ArgumentError("quadrature_rule: unsupported degree " + std::to_string(degree) +
                        " (supported 1..30)");
  }
  QuadratureRule rule;
  if (degree <= 5) {
    const double s15 = std::sqrt(15.0);
    const double a = (6.0 - s15) / 21.0;
    const double b = (6.0 + s15) / 21.0;
    const double wa = (155.0 - s15) / 2400.0;
    const double wb = (155.0 + s15) / 2400.0;
    rule.points = {{1.0 / 3.0, 1.0 / 3.0}, {a, a}, {1.0 - 2.0 * a, a}, {a, 1.0 - 2.0 * a},
                   {b, b}, {1.0 - 2.0 * b, b}, {b, 1.0 - 2.0 * b}};
    rule.weights = {9.0 / 80.0, wa, wa, wa, wb, wb, wb};
    rule.degree = 5;
    return rule;
  }
  // Duffy collapse (u, v) -> (u, v(1 - u)) with Jacobian (1 - u): the extra
  // factor raises the degree in u by one.
  const int n = (degree + 3) / 2;
  const LineRule line = gauss_legendre(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = line.points[static_cast<std::size_t>(i)];
      const double v = line.points[static_cast<std::size_t>(j)];
      rule.points.push_back({u, v * (1.0 - u)});
      rule.weights.push_back(line.weights[static_cast<std::size_t>(i)] *
                             line.weights[static_cast<std::size_t>(j)] * (1.0 - u));
    }
  }
  rule.degree = 2 * n - 2;
  return rule;
}

}  // namespace flexctl
