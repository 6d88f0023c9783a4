#include "flexctl/spaces.hpp"

#include "flexctl/error.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <utility>

namespace flexctl {

const char* to_string(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::velocity: return "velocity";
    case SpaceKind::pressure: return "pressure";
    case SpaceKind::temperature: return "temperature";
  }
  return "?";
}

Eigen::VectorXd DofConstraints::restrict(const Eigen::VectorXd& full) const {
  Eigen::VectorXd r(free_count());
  for (int i = 0; i < free_count(); ++i) r[i] = full[free_dofs[static_cast<std::size_t>(i)]];
  return r;
}

Eigen::VectorXd DofConstraints::extend(const Eigen::VectorXd& reduced) const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(size());
  for (int i = 0; i < free_count(); ++i) f[free_dofs[static_cast<std::size_t>(i)]] = reduced[i];
  return f;
}

SparseOperator DofConstraints::restrict_rows(const SparseOperator& op) const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(op.nonZeros()));
  for (int k = 0; k < op.outerSize(); ++k) {
    for (SparseOperator::InnerIterator it(op, k); it; ++it) {
      const int r = free_index[static_cast<std::size_t>(it.row())];
      if (r >= 0) t.emplace_back(r, static_cast<int>(it.col()), it.value());
    }
  }
  SparseOperator out(free_count(), op.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

SparseOperator DofConstraints::restrict_cols(const SparseOperator& op) const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(op.nonZeros()));
  for (int k = 0; k < op.outerSize(); ++k) {
    for (SparseOperator::InnerIterator it(op, k); it; ++it) {
      const int c = free_index[static_cast<std::size_t>(it.col())];
      if (c >= 0) t.emplace_back(static_cast<int>(it.row()), c, it.value());
    }
  }
  SparseOperator out(op.rows(), free_count());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

int SpaceSet::dimension(SpaceKind kind) const { return constraints(kind).size(); }

const DofConstraints& SpaceSet::constraints(SpaceKind kind) const {
  switch (kind) {
    case SpaceKind::velocity: return velocity;
    case SpaceKind::pressure: return pressure;
    case SpaceKind::temperature: return temperature;
  }
  return velocity;
}

Field SpaceSet::zero(SpaceKind kind) const {
  return Field{kind, Eigen::VectorXd::Zero(dimension(kind))};
}

void SpaceSet::check(const Field& f, SpaceKind kind, const char* what) const {
  if (f.space != kind || f.coefficients.size() != dimension(kind)) {
    throw ArgumentError(std::string(what) + ": expected a " + to_string(kind) +
                        " field, got " + to_string(f.space) + " of size " +
                        std::to_string(f.coefficients.size()));
  }
}

namespace {

DofConstraints make_constraints(std::vector<bool> essential) {
  DofConstraints c;
  c.essential = std::move(essential);
  c.free_index.assign(c.essential.size(), -1);
  for (std::size_t i = 0; i < c.essential.size(); ++i) {
    if (!c.essential[i]) {
      c.free_index[i] = static_cast<int>(c.free_dofs.size());
      c.free_dofs.push_back(static_cast<int>(i));
    }
  }
  return c;
}

BoundaryNodes collect_boundary(const SpaceSet& s, BoundaryTag tag) {
  const Mesh& mesh = *s.mesh;
  BoundaryNodes b;
  std::map<int, std::pair<Vec2, double>> acc;  // node -> (normal sum, weight)
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& edge = mesh.boundary_edges[e];
    if (edge.tag != tag) continue;
    b.edges.push_back(static_cast<int>(e));
    const double len = mesh.edge_length(static_cast<int>(e));
    const auto& en = s.boundary_edge_nodes[e];
    const double w[3] = {len / 6.0, len / 6.0, 4.0 * len / 6.0};
    for (int k = 0; k < 3; ++k) {
      auto& slot = acc.try_emplace(en[static_cast<std::size_t>(k)], Vec2::Zero(), 0.0).first->second;
      slot.first += edge.normal;
      slot.second += w[k];
    }
  }
  b.local_of_node.assign(static_cast<std::size_t>(s.node_count()), -1);
  for (const auto& [node, nw] : acc) {
    b.local_of_node[static_cast<std::size_t>(node)] = static_cast<int>(b.nodes.size());
    b.nodes.push_back(node);
    b.normals.push_back(nw.first.normalized());
    b.weights.push_back(nw.second);
  }
  return b;
}

}  // namespace

SpaceSet build_spaces(const Mesh& mesh) {
  SpaceSet s;
  s.mesh = &mesh;
  const int nv = static_cast<int>(mesh.vertices.size());

  std::map<std::pair<int, int>, int> edge_id;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)];
      const int b = t[static_cast<std::size_t>((k + 1) % 3)];
      edge_id.emplace(std::minmax(a, b), 0);
    }
  }
  s.nodes = mesh.vertices;
  for (auto& [key, id] : edge_id) {
    id = static_cast<int>(s.nodes.size());
    s.nodes.push_back(0.5 * (mesh.vertices[static_cast<std::size_t>(key.first)] +
                             mesh.vertices[static_cast<std::size_t>(key.second)]));
  }
  auto mid = [&](int a, int b) { return edge_id.at(std::minmax(a, b)); };

  s.element_nodes.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    s.element_nodes.push_back({t[0], t[1], t[2], mid(t[0], t[1]), mid(t[1], t[2]), mid(t[2], t[0])});
  }
  for (const auto& e : mesh.boundary_edges) {
    s.boundary_edge_nodes.push_back({e.vertices[0], e.vertices[1], mid(e.vertices[0], e.vertices[1])});
  }

  const int nn = s.node_count();
  std::vector<bool> vel(static_cast<std::size_t>(2 * nn), false);
  std::vector<bool> temp(static_cast<std::size_t>(nn), false);
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& edge = mesh.boundary_edges[e];
    for (int node : s.boundary_edge_nodes[e]) {
      const auto n = static_cast<std::size_t>(node);
      if (edge.tag == BoundaryTag::gamma2) {
        vel[2 * n] = vel[2 * n + 1] = true;
      } else {
        // tangential component of an axis-aligned edge is the other axis
        const bool vertical = std::abs(edge.normal.x()) > 0.5;
        vel[2 * n + (vertical ? 1 : 0)] = true;
        temp[n] = true;
      }
    }
  }
  s.velocity = make_constraints(std::move(vel));
  s.temperature = make_constraints(std::move(temp));
  s.pressure = make_constraints(std::vector<bool>(static_cast<std::size_t>(nv), false));

  s.gamma1 = collect_boundary(s, BoundaryTag::gamma1);
  s.gamma2 = collect_boundary(s, BoundaryTag::gamma2);
  if (s.gamma2.nodes.empty()) throw ConfigError("spaces: Γ₂ has no nodes");
  return s;
}

Field interpolate_velocity(const SpaceSet& spaces, const std::function<Vec2(double, double)>& f) {
  Field out = spaces.zero(SpaceKind::velocity);
  for (int i = 0; i < spaces.node_count(); ++i) {
    const Vec2& x = spaces.nodes[static_cast<std::size_t>(i)];
    const Vec2 v = f(x.x(), x.y());
    out.coefficients[2 * i] = v.x();
    out.coefficients[2 * i + 1] = v.y();
  }
  return out;
}

Field interpolate_scalar(const SpaceSet& spaces, SpaceKind kind,
                         const std::function<double(double, double)>& f) {
  if (kind == SpaceKind::velocity) throw ArgumentError("interpolate_scalar: velocity is a vector space");
  Field out = spaces.zero(kind);
  for (int i = 0; i < out.coefficients.size(); ++i) {
    const Vec2& x = spaces.nodes[static_cast<std::size_t>(i)];
    out.coefficients[i] = f(x.x(), x.y());
  }
  return out;
}

void apply_constraints(const SpaceSet& spaces, Field& field) {
  const auto& c = spaces.constraints(field.space);
  for (int i = 0; i < c.size(); ++i) {
    if (c.essential[static_cast<std::size_t>(i)]) field.coefficients[i] = 0.0;
  }
}

}  // namespace flexctl
