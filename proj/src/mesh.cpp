#include "flexctl/mesh.hpp"

#include "flexctl/error.hpp"

#include <string>

namespace flexctl {

const char* to_string(BoundaryTag tag) {
  return tag == BoundaryTag::gamma1 ? "gamma1" : "gamma2";
}

const char* to_string(Side side) {
  switch (side) {
    case Side::left: return "left";
    case Side::right: return "right";
    case Side::bottom: return "bottom";
    case Side::top: return "top";
  }
  return "?";
}

BoundaryAssignment default_boundary_assignment() {
  return {{Side::left, BoundaryTag::gamma1},
          {Side::right, BoundaryTag::gamma1},
          {Side::bottom, BoundaryTag::gamma2},
          {Side::top, BoundaryTag::gamma2}};
}

double Mesh::signed_area(int triangle) const {
  const auto& t = triangles.at(triangle);
  const Vec2 a = vertices[t[1]] - vertices[t[0]];
  const Vec2 b = vertices[t[2]] - vertices[t[0]];
  return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

double Mesh::edge_length(int edge) const {
  const auto& e = boundary_edges.at(edge);
  return (vertices[e.vertices[1]] - vertices[e.vertices[0]]).norm();
}

namespace {

BoundaryTag tag_of(const BoundaryAssignment& assignment, Side side) {
  auto it = assignment.find(side);
  if (it == assignment.end()) {
    throw ConfigError(std::string("boundary side '") + to_string(side) + "' has no tag");
  }
  return it->second;
}

}  // namespace

Mesh build_rectangle_mesh(int nx, int ny, Vec2 lengths, const BoundaryAssignment& assignment) {
  if (nx < 1 || ny < 1) {
    throw ConfigError("mesh: nx and ny must be >= 1 (got " + std::to_string(nx) + ", " +
                      std::to_string(ny) + ")");
  }
  if (!(lengths.x() > 0.0) || !(lengths.y() > 0.0)) {
    throw ConfigError("mesh: lengths must be positive");
  }
  bool has1 = false;
  bool has2 = false;
  for (Side s : {Side::left, Side::right, Side::bottom, Side::top}) {
    (tag_of(assignment, s) == BoundaryTag::gamma1 ? has1 : has2) = true;
  }
  if (!has1) throw ConfigError("mesh: Γ₁ empty (gamma1 has no boundary side)");
  if (!has2) throw ConfigError("mesh: Γ₂ empty (gamma2 has no boundary side)");

  Mesh mesh;
  mesh.lengths = lengths;
  const double hx = lengths.x() / nx;
  const double hy = lengths.y() / ny;
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };

  mesh.vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // Pin the far sides exactly so boundary tests see Lx, Ly without rounding.
      const double x = i == nx ? lengths.x() : i * hx;
      const double y = j == ny ? lengths.y() : j * hy;
      mesh.vertices.emplace_back(x, y);
    }
  }

  auto first = [nx](int i, int j) { return 2 * (j * nx + i); };
  mesh.triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      mesh.triangles.push_back({a, b, c});
      mesh.triangles.push_back({a, c, d});
    }
  }

  auto add_edge = [&](int v0, int v1, Side side, int tri) {
    BoundaryEdge e{{v0, v1}, tag_of(assignment, side), side, Vec2::Zero(), tri};
    mesh.boundary_edges.push_back(e);
    mesh.boundary_edges.back().normal =
        outward_normal(mesh, static_cast<int>(mesh.boundary_edges.size()) - 1);
  };
  for (int i = 0; i < nx; ++i) add_edge(vid(i, 0), vid(i + 1, 0), Side::bottom, first(i, 0));
  for (int j = 0; j < ny; ++j) add_edge(vid(nx, j), vid(nx, j + 1), Side::right, first(nx - 1, j));
  for (int i = nx; i > 0; --i) add_edge(vid(i, ny), vid(i - 1, ny), Side::top, first(i - 1, ny - 1) + 1);
  for (int j = ny; j > 0; --j) add_edge(vid(0, j), vid(0, j - 1), Side::left, first(0, j - 1) + 1);
  return mesh;
}

Vec2 outward_normal(const Mesh& mesh, int edge_index) {
  if (edge_index < 0 || edge_index >= static_cast<int>(mesh.boundary_edges.size())) {
    throw ArgumentError("outward_normal: edge index " + std::to_string(edge_index) +
                        " out of range");
  }
  const auto& e = mesh.boundary_edges[static_cast<std::size_t>(edge_index)];
  const Vec2& a = mesh.vertices[e.vertices[0]];
  const Vec2& b = mesh.vertices[e.vertices[1]];
  const Vec2 t = b - a;
  Vec2 n(t.y(), -t.x());
  n /= n.norm();
  const auto& tri = mesh.triangles.at(e.triangle);
  const Vec2 centroid = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
  if (n.dot(0.5 * (a + b) - centroid) < 0.0) n = -n;
  return n;
}

}  // namespace flexctl
