#pragma once

#include "flexctl/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <vector>

namespace flexctl {

enum class SpaceKind { velocity, pressure, temperature };

const char* to_string(SpaceKind kind);

using SparseOperator = Eigen::SparseMatrix<double>;

/// Coefficient vector over one of the discrete spaces. Velocity coefficients
/// are interleaved per node: (x-component, y-component).
struct Field {
  SpaceKind space = SpaceKind::velocity;
  Eigen::VectorXd coefficients;
};

/// Degrees of freedom that are pinned to zero and the complementary free set.
struct DofConstraints {
  std::vector<bool> essential;  // one flag per dof
  std::vector<int> free_dofs;   // ascending
  std::vector<int> free_index;  // dof -> position in free_dofs, or -1

  [[nodiscard]] int size() const { return static_cast<int>(essential.size()); }
  [[nodiscard]] int free_count() const { return static_cast<int>(free_dofs.size()); }
  [[nodiscard]] Eigen::VectorXd restrict(const Eigen::VectorXd& full) const;
  [[nodiscard]] Eigen::VectorXd extend(const Eigen::VectorXd& reduced) const;
  [[nodiscard]] SparseOperator restrict_rows(const SparseOperator& op) const;
  [[nodiscard]] SparseOperator restrict_cols(const SparseOperator& op) const;
};

/// Nodes of the boundary part on one tag, in ascending quadratic-node order.
struct BoundaryNodes {
  std::vector<int> nodes;           // quadratic node ids
  std::vector<int> local_of_node;   // node id -> index in `nodes`, or -1
  std::vector<Vec2> normals;        // averaged unit normal per node
  std::vector<double> weights;      // Simpson nodal weights, sum = |Γ_i|
  std::vector<int> edges;           // boundary edge indices carrying the tag

  [[nodiscard]] int size() const { return static_cast<int>(nodes.size()); }
};

/// Quadratic velocity / linear total pressure / quadratic temperature.
/// Quadratic nodes are the mesh vertices followed by one node per edge,
/// numbered in lexicographic order of the sorted vertex pair, so numbering does
/// not depend on triangle ordering.
struct SpaceSet {
  const Mesh* mesh = nullptr;
  std::vector<Vec2> nodes;                          // quadratic nodes
  std::vector<std::array<int, 6>> element_nodes;    // v0 v1 v2 m01 m12 m20
  std::vector<std::array<int, 3>> boundary_edge_nodes;  // start, end, midpoint

  DofConstraints velocity;
  DofConstraints pressure;
  DofConstraints temperature;

  BoundaryNodes gamma1;
  BoundaryNodes gamma2;

  [[nodiscard]] int node_count() const { return static_cast<int>(nodes.size()); }
  [[nodiscard]] int vertex_count() const { return static_cast<int>(mesh->vertices.size()); }
  [[nodiscard]] int dimension(SpaceKind kind) const;
  [[nodiscard]] const DofConstraints& constraints(SpaceKind kind) const;

  /// Zero field of the given space.
  [[nodiscard]] Field zero(SpaceKind kind) const;
  /// Throws ArgumentError unless `f` belongs to `kind` and has the right size.
  void check(const Field& f, SpaceKind kind, const char* what) const;
};

/// The mesh must outlive the returned spaces.
SpaceSet build_spaces(const Mesh& mesh);

/// Nodal interpolation (essential constraints applied afterwards).
Field interpolate_velocity(const SpaceSet& spaces, const std::function<Vec2(double, double)>& f);
Field interpolate_scalar(const SpaceSet& spaces, SpaceKind kind,
                         const std::function<double(double, double)>& f);

/// Zeroes the essential degrees of freedom in place.
void apply_constraints(const SpaceSet& spaces, Field& field);

}  // namespace flexctl
