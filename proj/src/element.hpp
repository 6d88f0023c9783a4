#pragma once

// Quadratic/linear Lagrange tabulation on affine triangles. Internal to the
// library.

#include "flexctl/quadrature.hpp"
#include "flexctl/spaces.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <vector>

namespace flexctl::detail {

struct PointValues {
  Vec2 x;
  double weight;               // reference weight × |det J|
  std::array<double, 6> n;     // quadratic basis
  std::array<Vec2, 6> grad;    // physical gradients
  std::array<double, 3> l;     // linear basis (barycentric)
  std::array<Vec2, 3> lgrad;
};

inline std::array<double, 6> quadratic_basis(double xi, double eta) {
  const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
  return {l0 * (2.0 * l0 - 1.0), l1 * (2.0 * l1 - 1.0), l2 * (2.0 * l2 - 1.0),
          4.0 * l0 * l1, 4.0 * l1 * l2, 4.0 * l2 * l0};
}

/// Tabulates one element at every point of `rule`.
inline std::vector<PointValues> tabulate(const SpaceSet& s, int element, const QuadratureRule& rule) {
  const auto& tri = s.mesh->triangles[static_cast<std::size_t>(element)];
  const Vec2& p0 = s.mesh->vertices[static_cast<std::size_t>(tri[0])];
  const Vec2& p1 = s.mesh->vertices[static_cast<std::size_t>(tri[1])];
  const Vec2& p2 = s.mesh->vertices[static_cast<std::size_t>(tri[2])];
  Eigen::Matrix2d jac;
  jac.col(0) = p1 - p0;
  jac.col(1) = p2 - p0;
  const double det = jac.determinant();
  const Eigen::Matrix2d inv_t = jac.inverse().transpose();
  const std::array<Vec2, 3> dl = {inv_t * Vec2(-1.0, -1.0), inv_t * Vec2(1.0, 0.0),
                                  inv_t * Vec2(0.0, 1.0)};

  std::vector<PointValues> out(rule.points.size());
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const double xi = rule.points[q].xi, eta = rule.points[q].eta;
    const std::array<double, 3> l = {1.0 - xi - eta, xi, eta};
    auto& pv = out[q];
    pv.x = p0 + jac * Vec2(xi, eta);
    pv.weight = rule.weights[q] * std::abs(det);
    pv.n = quadratic_basis(xi, eta);
    pv.l = l;
    pv.lgrad = dl;
    for (int a = 0; a < 3; ++a) {
      pv.grad[static_cast<std::size_t>(a)] = (4.0 * l[static_cast<std::size_t>(a)] - 1.0) * dl[static_cast<std::size_t>(a)];
    }
    constexpr std::array<std::pair<int, int>, 3> edges = {{{0, 1}, {1, 2}, {2, 0}}};
    for (int k = 0; k < 3; ++k) {
      const auto [i, j] = edges[static_cast<std::size_t>(k)];
      pv.grad[static_cast<std::size_t>(3 + k)] =
          4.0 * (l[static_cast<std::size_t>(i)] * dl[static_cast<std::size_t>(j)] +
                 l[static_cast<std::size_t>(j)] * dl[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

/// Collects (row, col, value) contributions and merges them in a canonical
/// order (row, col, value), making the sums independent of element order.
class CanonicalAssembler {
 public:
  CanonicalAssembler(int rows, int cols) : rows_(rows), cols_(cols) {}

  void add(int row, int col, double value) { entries_.push_back({row, col, value}); }

  SparseOperator build() {
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      return std::tie(a.row, a.col, a.value) < std::tie(b.row, b.col, b.value);
    });
    std::vector<Eigen::Triplet<double>> merged;
    merged.reserve(entries_.size() / 4 + 1);
    for (std::size_t i = 0; i < entries_.size();) {
      double sum = 0.0;
      std::size_t j = i;
      for (; j < entries_.size() && entries_[j].row == entries_[i].row &&
             entries_[j].col == entries_[i].col;
           ++j) {
        sum += entries_[j].value;
      }
      merged.emplace_back(entries_[i].row, entries_[i].col, sum);
      i = j;
    }
    SparseOperator op(rows_, cols_);
    op.setFromTriplets(merged.begin(), merged.end());
    return op;
  }

 private:
  struct Entry {
    int row;
    int col;
    double value;
  };
  int rows_;
  int cols_;
  std::vector<Entry> entries_;
};

}  // namespace flexctl::detail
