#include "doctest.h"

#include "flexctl/error.hpp"
#include "flexctl/mesh.hpp"
#include "flexctl/quadrature.hpp"

#include <cmath>
#include <set>
#include <utility>

using namespace flexctl;

namespace {

// ∫_T x^a y^b over the reference triangle = a! b! / (a + b + 2)!
double monomial_integral(int a, int b) {
  return std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(a + b + 3.0);
}

double integrate(const QuadratureRule& rule, int a, int b) {
  double s = 0.0;
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    s += rule.weights[q] * std::pow(rule.points[q].xi, a) * std::pow(rule.points[q].eta, b);
  }
  return s;
}

bool inside(const Mesh& m, const Vec2& p) {
  return p.x() > 0.0 && p.x() < m.lengths.x() && p.y() > 0.0 && p.y() < m.lengths.y();
}

}  // namespace

TEST_CASE("rectangle mesh counts") {
  BoundaryAssignment lr1 = {{Side::left, BoundaryTag::gamma1},
                            {Side::right, BoundaryTag::gamma1},
                            {Side::bottom, BoundaryTag::gamma2},
                            {Side::top, BoundaryTag::gamma2}};
  const Mesh m1 = build_rectangle_mesh(1, 1, {1.0, 1.0}, lr1);
  CHECK(m1.vertices.size() == 4);
  CHECK(m1.triangles.size() == 2);
  CHECK(m1.boundary_edges.size() == 4);
  int n1 = 0;
  for (const auto& e : m1.boundary_edges) n1 += e.tag == BoundaryTag::gamma1;
  CHECK(n1 == 2);

  const Mesh m2 = build_rectangle_mesh(2, 2, {1.0, 1.0});
  CHECK(m2.vertices.size() == 9);
  CHECK(m2.triangles.size() == 8);
  CHECK(m2.boundary_edges.size() == 8);
}

TEST_CASE("boundary assignment must use both tags") {
  BoundaryAssignment all2 = {{Side::left, BoundaryTag::gamma2},
                             {Side::right, BoundaryTag::gamma2},
                             {Side::bottom, BoundaryTag::gamma2},
                             {Side::top, BoundaryTag::gamma2}};
  CHECK_THROWS_WITH_AS(build_rectangle_mesh(2, 2, {1.0, 1.0}, all2), doctest::Contains("Γ₁ empty"),
                       ConfigError);
  BoundaryAssignment all1 = all2;
  for (auto& [side, tag] : all1) tag = BoundaryTag::gamma1;
  CHECK_THROWS_WITH_AS(build_rectangle_mesh(2, 2, {1.0, 1.0}, all1), doctest::Contains("Γ₂ empty"),
                       ConfigError);
  CHECK_THROWS_AS(build_rectangle_mesh(0, 2, {1.0, 1.0}), ConfigError);
}

TEST_CASE("outward normals") {
  const Mesh m = build_rectangle_mesh(3, 2, {1.0, 1.0});
  for (int e = 0; e < static_cast<int>(m.boundary_edges.size()); ++e) {
    const Vec2 n = outward_normal(m, e);
    CHECK(std::abs(n.norm() - 1.0) <= 1e-14);
    const auto& edge = m.boundary_edges[static_cast<std::size_t>(e)];
    switch (edge.side) {
      case Side::bottom: CHECK(n == Vec2(0.0, -1.0)); break;
      case Side::left: CHECK(n == Vec2(-1.0, 0.0)); break;
      case Side::right: CHECK(n == Vec2(1.0, 0.0)); break;
      case Side::top: CHECK(n == Vec2(0.0, 1.0)); break;
    }
    CHECK((n - edge.normal).norm() == 0.0);
  }
  CHECK_THROWS_AS(outward_normal(m, -1), ArgumentError);
  CHECK_THROWS_AS(outward_normal(m, static_cast<int>(m.boundary_edges.size())), ArgumentError);
}

TEST_CASE("mesh invariants over a sweep of resolutions") {
  for (int nx : {1, 2, 3, 7, 16, 64}) {
    for (int ny : {1, 4, 9, 64}) {
      const Vec2 len(2.5, 0.75);
      const Mesh m = build_rectangle_mesh(nx, ny, len);
      double area = 0.0;
      for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
        const double a = m.signed_area(t);
        REQUIRE(a > 0.0);
        area += a;
      }
      CHECK(std::abs(area - len.x() * len.y()) <= 1e-12 * len.x() * len.y());

      std::set<std::pair<int, int>> edges;
      for (const auto& t : m.triangles) {
        for (int k = 0; k < 3; ++k) edges.insert(std::minmax(t[static_cast<std::size_t>(k)], t[static_cast<std::size_t>((k + 1) % 3)]));
      }
      const long v = static_cast<long>(m.vertices.size());
      CHECK(v - static_cast<long>(edges.size()) + static_cast<long>(m.triangles.size()) == 1);

      // boundary edges: each in exactly one triangle, displaced midpoints in/out
      std::set<std::pair<int, int>> seen;
      bool has2 = false;
      for (const auto& e : m.boundary_edges) {
        const auto key = std::minmax(e.vertices[0], e.vertices[1]);
        CHECK(seen.insert(key).second);
        int owners = 0;
        for (const auto& t : m.triangles) {
          int hits = 0;
          for (int k = 0; k < 3; ++k) hits += (t[static_cast<std::size_t>(k)] == key.first || t[static_cast<std::size_t>(k)] == key.second);
          owners += hits == 2;
        }
        CHECK(owners == 1);
        const Vec2 mid = 0.5 * (m.vertices[static_cast<std::size_t>(e.vertices[0])] + m.vertices[static_cast<std::size_t>(e.vertices[1])]);
        CHECK_FALSE(inside(m, mid + 1e-8 * e.normal));
        CHECK(inside(m, mid - 1e-8 * e.normal));
        has2 = has2 || e.tag == BoundaryTag::gamma2;
      }
      CHECK(has2);
      CHECK(m.boundary_edges.size() == static_cast<std::size_t>(2 * (nx + ny)));
    }
  }
}

TEST_CASE("quadrature on the reference triangle") {
  const QuadratureRule r5 = quadrature_rule(5);
  double wsum = 0.0;
  for (double w : r5.weights) wsum += w;
  CHECK(std::abs(wsum - 0.5) <= 1e-15);
  CHECK(std::abs(integrate(r5, 0, 0) - 0.5) <= 1e-15);
  CHECK(std::abs(integrate(r5, 1, 0) - 1.0 / 6.0) <= 1e-15);
  CHECK(std::abs(integrate(r5, 2, 2) - 1.0 / 180.0) <= 1e-16);

  for (int degree : {5, 6, 8, 10, 13, 20}) {
    const QuadratureRule r = quadrature_rule(degree);
    CHECK(r.degree >= degree);
    double ws = 0.0;
    for (double w : r.weights) ws += w;
    CHECK(std::abs(ws - 0.5) <= 1e-15);
    for (int a = 0; a <= degree; ++a) {
      for (int b = 0; a + b <= degree; ++b) {
        const double exact = monomial_integral(a, b);
        CHECK(std::abs(integrate(r, a, b) - exact) <= 1e-14 * exact);
      }
    }
  }
  CHECK_THROWS_AS(quadrature_rule(0), ArgumentError);
  CHECK_THROWS_AS(quadrature_rule(31), ArgumentError);
}

TEST_CASE("gauss-legendre line rule") {
  for (int n = 1; n <= 8; ++n) {
    const LineRule r = gauss_legendre(n);
    for (int p = 0; p <= 2 * n - 1; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < r.points.size(); ++i) s += r.weights[i] * std::pow(r.points[i], p);
      CHECK(std::abs(s - 1.0 / (p + 1.0)) <= 1e-15);
    }
  }
}
