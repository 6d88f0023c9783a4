#pragma once

#include <Eigen/Dense>

#include <array>
#include <map>
#include <vector>

namespace flexctl {

using Vec2 = Eigen::Vector2d;

/// Boundary part: Γ₁ carries the total-pressure condition, Γ₂ the heat flux.
enum class BoundaryTag { gamma1, gamma2 };

enum class Side { left, right, bottom, top };

const char* to_string(BoundaryTag tag);
const char* to_string(Side side);

using BoundaryAssignment = std::map<Side, BoundaryTag>;

/// Left/right → Γ₁, bottom/top → Γ₂: a pressure-driven channel with heated walls.
BoundaryAssignment default_boundary_assignment();

struct BoundaryEdge {
  std::array<int, 2> vertices;  // ordered counterclockwise along the boundary
  BoundaryTag tag;
  Side side;
  Vec2 normal;
  int triangle;
};

/// Triangulated rectangle [0, Lx] × [0, Ly]. Immutable after construction.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;  // counterclockwise
  std::vector<BoundaryEdge> boundary_edges;
  Vec2 lengths{1.0, 1.0};

  [[nodiscard]] double signed_area(int triangle) const;
  [[nodiscard]] double edge_length(int edge) const;
};

/// Structured nx × ny grid, each cell cut along its (i,j)-(i+1,j+1) diagonal.
/// Throws ConfigError when one of the two tags is left without any side.
Mesh build_rectangle_mesh(int nx, int ny, Vec2 lengths,
                          const BoundaryAssignment& assignment = default_boundary_assignment());

/// Unit normal of a boundary edge, pointing away from its owning triangle.
Vec2 outward_normal(const Mesh& mesh, int edge_index);

}  // namespace flexctl
