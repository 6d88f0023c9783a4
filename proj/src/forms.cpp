#include "flexctl/forms.hpp"

#include "element.hpp"
#include "flexctl/error.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <random>
#include <string>

namespace flexctl {

namespace {

using detail::CanonicalAssembler;
using detail::PointValues;

constexpr int kInteriorDegree = 5;
constexpr int kEdgePoints = 3;  // Gauss–Legendre, exact to degree 5

const QuadratureRule& interior_rule() {
  static const QuadratureRule rule = quadrature_rule(kInteriorDegree);
  return rule;
}

int element_count(const SpaceSet& s) { return static_cast<int>(s.element_nodes.size()); }

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

// Velocity field values at one point.
Vec2 velocity_at(const PointValues& pv, const std::array<int, 6>& nodes, const Eigen::VectorXd& c) {
  Vec2 v = Vec2::Zero();
  for (int a = 0; a < 6; ++a) {
    const int n = nodes[idx(a)];
    v += pv.n[idx(a)] * Vec2(c[2 * n], c[2 * n + 1]);
  }
  return v;
}

double rot_at(const PointValues& pv, const std::array<int, 6>& nodes, const Eigen::VectorXd& c) {
  double r = 0.0;
  for (int a = 0; a < 6; ++a) {
    const int n = nodes[idx(a)];
    r += c[2 * n + 1] * pv.grad[idx(a)].x() - c[2 * n] * pv.grad[idx(a)].y();
  }
  return r;
}


double scalar_at(const PointValues& pv, const std::array<int, 6>& nodes, const Eigen::VectorXd& c) {
  double s = 0.0;
  for (int a = 0; a < 6; ++a) s += pv.n[idx(a)] * c[nodes[idx(a)]];
  return s;
}

Vec2 scalar_grad_at(const PointValues& pv, const std::array<int, 6>& nodes, const Eigen::VectorXd& c) {
  Vec2 g = Vec2::Zero();
  for (int a = 0; a < 6; ++a) g += c[nodes[idx(a)]] * pv.grad[idx(a)];
  return g;
}

// Adds a symmetric local matrix given by f(a, b) for a ≤ b, mirrored exactly.
template <typename LocalFn, typename DofFn>
void add_symmetric(CanonicalAssembler& asmb, int n_local, LocalFn&& f, DofFn&& dof) {
  for (int a = 0; a < n_local; ++a) {
    for (int b = a; b < n_local; ++b) {
      const double v = f(a, b);
      asmb.add(dof(a), dof(b), v);
      if (b != a) asmb.add(dof(b), dof(a), v);
    }
  }
}

// Σ_q w (x_a x_b) evaluated symmetrically in (a, b).
template <typename ValueFn>
double sym_integral(const std::vector<PointValues>& pts, int a, int b, ValueFn&& value) {
  double s = 0.0;
  for (const auto& pv : pts) s += pv.weight * value(pv, a, b);
  return s;
}

// Edge tabulation: Gauss points along boundary edge e with the three trace
// basis functions (start, end, midpoint) of the quadratic space.
struct EdgePoint {
  double weight;
  std::array<double, 3> n;
  Vec2 x;
};

std::vector<EdgePoint> edge_points(const SpaceSet& s, int edge) {
  static const LineRule line = gauss_legendre(kEdgePoints);
  const auto& e = s.mesh->boundary_edges[idx(edge)];
  const Vec2& a = s.mesh->vertices[idx(e.vertices[0])];
  const Vec2& b = s.mesh->vertices[idx(e.vertices[1])];
  const double len = (b - a).norm();
  std::vector<EdgePoint> out;
  for (std::size_t q = 0; q < line.points.size(); ++q) {
    const double t = line.points[q];
    out.push_back({line.weights[q] * len,
                   {(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)},
                   a + t * (b - a)});
  }
  return out;
}

}  // namespace

SparseOperator assemble_mass(const SpaceSet& s, SpaceKind kind) {
  const int n = s.dimension(kind);
  CanonicalAssembler asmb(n, n);
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, interior_rule());
    const auto& nodes = s.element_nodes[idx(e)];
    switch (kind) {
      case SpaceKind::pressure:
        add_symmetric(
            asmb, 3,
            [&](int a, int b) {
              return sym_integral(pts, a, b, [](const PointValues& pv, int i, int j) {
                return pv.l[idx(i)] * pv.l[idx(j)];
              });
            },
            [&](int a) { return nodes[idx(a)]; });
        break;
      case SpaceKind::temperature:
        add_symmetric(
            asmb, 6,
            [&](int a, int b) {
              return sym_integral(pts, a, b, [](const PointValues& pv, int i, int j) {
                return pv.n[idx(i)] * pv.n[idx(j)];
              });
            },
            [&](int a) { return nodes[idx(a)]; });
        break;
      case SpaceKind::velocity:
        for (int c = 0; c < 2; ++c) {
          add_symmetric(
              asmb, 6,
              [&](int a, int b) {
                return sym_integral(pts, a, b, [](const PointValues& pv, int i, int j) {
                  return pv.n[idx(i)] * pv.n[idx(j)];
                });
              },
              [&](int a) { return 2 * nodes[idx(a)] + c; });
        }
        break;
    }
  }
  return asmb.build();
}

SparseOperator assemble_a1(const SpaceSet& s) {
  const int n = s.dimension(SpaceKind::velocity);
  CanonicalAssembler asmb(n, n);
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, interior_rule());
    const auto& nodes = s.element_nodes[idx(e)];
    // local dof k = 2a + c; rot of basis (a, 0) is −∂_y N_a, of (a, 1) is ∂_x N_a
    auto rot = [](const PointValues& pv, int k) {
      const Vec2& g = pv.grad[idx(k / 2)];
      return k % 2 == 0 ? -g.y() : g.x();
    };
    add_symmetric(
        asmb, 12,
        [&](int a, int b) {
          return sym_integral(pts, a, b, [&](const PointValues& pv, int i, int j) {
            return rot(pv, i) * rot(pv, j);
          });
        },
        [&](int k) { return 2 * nodes[idx(k / 2)] + k % 2; });
  }
  return asmb.build();
}

SparseOperator assemble_a2(const SpaceSet& s) {
  const int n = s.dimension(SpaceKind::temperature);
  CanonicalAssembler asmb(n, n);
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, interior_rule());
    const auto& nodes = s.element_nodes[idx(e)];
    add_symmetric(
        asmb, 6,
        [&](int a, int b) {
          return sym_integral(pts, a, b, [](const PointValues& pv, int i, int j) {
            return pv.grad[idx(i)].dot(pv.grad[idx(j)]);
          });
        },
        [&](int a) { return nodes[idx(a)]; });
  }
  return asmb.build();
}

SparseOperator assemble_velocity_stiffness(const SpaceSet& s) {
  const int n = s.dimension(SpaceKind::velocity);
  CanonicalAssembler asmb(n, n);
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, interior_rule());
    const auto& nodes = s.element_nodes[idx(e)];
    for (int c = 0; c < 2; ++c) {
      add_symmetric(
          asmb, 6,
          [&](int a, int b) {
            return sym_integral(pts, a, b, [](const PointValues& pv, int i, int j) {
              return pv.grad[idx(i)].dot(pv.grad[idx(j)]);
            });
          },
          [&](int a) { return 2 * nodes[idx(a)] + c; });
    }
  }
  return asmb.build();
}

SparseOperator assemble_grad_div(const SpaceSet& s) {
  const int n = s.dimension(SpaceKind::velocity);
  CanonicalAssembler asmb(n, n);
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, interior_rule());
    const auto& nodes = s.element_nodes[idx(e)];
    add_symmetric(
        asmb, 12,
        [&](int a, int b) {
          return sym_integral(pts, a, b, [](const PointValues& pv, int i, int j) {
            return pv.grad[idx(i / 2)][i % 2] * pv.grad[idx(j / 2)][j % 2];
          });
        },
        [&](int a) { return 2 * nodes[idx(a / 2)] + a % 2; });
  }
  return asmb.build();
}

SparseOperator assemble_div(const SpaceSet& s) {
  CanonicalAssembler asmb(s.dimension(SpaceKind::pressure), s.dimension(SpaceKind::velocity));
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, interior_rule());
    const auto& nodes = s.element_nodes[idx(e)];
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 12; ++k) {
        double v = 0.0;
        for (const auto& pv : pts) {
          v += pv.weight * pv.l[idx(i)] * pv.grad[idx(k / 2)][k % 2];
        }
        asmb.add(nodes[idx(i)], 2 * nodes[idx(k / 2)] + k % 2, v);
      }
    }
  }
  return asmb.build();
}

double apply_b(const SpaceSet& s, const Field& u, const Field& v, const Field& w) {
  s.check(u, SpaceKind::velocity, "apply_b(u)");
  s.check(v, SpaceKind::velocity, "apply_b(v)");
  s.check(w, SpaceKind::velocity, "apply_b(w)");
  double total = 0.0;
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, interior_rule());
    const auto& nodes = s.element_nodes[idx(e)];
    for (const auto& pv : pts) {
      const double r = rot_at(pv, nodes, u.coefficients);
      const Vec2 vv = velocity_at(pv, nodes, v.coefficients);
      const Vec2 ww = velocity_at(pv, nodes, w.coefficients);
      total += pv.weight * r * (vv.x() * ww.y() - vv.y() * ww.x());
    }
  }
  return total;
}

SparseOperator assemble_b_linearized(const SpaceSet& s, const Field& frozen, FrozenSlot slot) {
  s.check(frozen, SpaceKind::velocity, "assemble_b_linearized");
  const int n = s.dimension(SpaceKind::velocity);
  CanonicalAssembler asmb(n, n);
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, interior_rule());
    const auto& nodes = s.element_nodes[idx(e)];
    if (slot == FrozenSlot::first) {
      // b(u, v, ψ) = ∫ ω (v₁ψ₂ − v₂ψ₁): assemble the (ψ₂, v₁) block R and
      // form R − Rᵀ, which is exactly antisymmetric.
      std::vector<double> omega(pts.size());
      for (std::size_t q = 0; q < pts.size(); ++q) omega[q] = pts[q].weight * rot_at(pts[q], nodes, frozen.coefficients);
      for (int a = 0; a < 6; ++a) {
        for (int b = a; b < 6; ++b) {
          double sab = 0.0;
          for (std::size_t q = 0; q < pts.size(); ++q) sab += omega[q] * (pts[q].n[idx(a)] * pts[q].n[idx(b)]);
          asmb.add(2 * nodes[idx(b)] + 1, 2 * nodes[idx(a)], sab);
          if (a != b) asmb.add(2 * nodes[idx(a)] + 1, 2 * nodes[idx(b)], sab);
        }
      }
    } else {
      // b(g, u, ψ) = ∫ rot g (u₁ψ₂ − u₂ψ₁)
      std::vector<Vec2> uq(pts.size());
      for (std::size_t q = 0; q < pts.size(); ++q) uq[q] = velocity_at(pts[q], nodes, frozen.coefficients);
      for (int i = 0; i < 12; ++i) {      // test ψ
        for (int k = 0; k < 12; ++k) {    // trial g
          double v = 0.0;
          for (std::size_t q = 0; q < pts.size(); ++q) {
            const auto& pv = pts[q];
            const Vec2& uu = uq[q];
            const Vec2& gk = pv.grad[idx(k / 2)];
            const double rot_g = k % 2 == 0 ? -gk.y() : gk.x();
            const double cross = i % 2 == 0 ? -uu.y() : uu.x();
            v += pv.weight * rot_g * cross * pv.n[idx(i / 2)];
          }
          asmb.add(2 * nodes[idx(i / 2)] + i % 2, 2 * nodes[idx(k / 2)] + k % 2, v);
        }
      }
    }
  }
  SparseOperator op = asmb.build();
  if (slot == FrozenSlot::first) {
    SparseOperator t = op.transpose();
    op = op - t;
  }
  return op;
}

double apply_c(const SpaceSet& s, const Field& z, const Field& w, const Field& phi, AdvectionForm form) {
  s.check(z, SpaceKind::velocity, "apply_c(z)");
  s.check(w, SpaceKind::temperature, "apply_c(w)");
  s.check(phi, SpaceKind::temperature, "apply_c(phi)");
  double forward = 0.0;
  double backward = 0.0;
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, interior_rule());
    const auto& nodes = s.element_nodes[idx(e)];
    for (const auto& pv : pts) {
      const Vec2 zz = velocity_at(pv, nodes, z.coefficients);
      const double wv = scalar_at(pv, nodes, w.coefficients);
      const double pvv = scalar_at(pv, nodes, phi.coefficients);
      forward += pv.weight * (zz.dot(scalar_grad_at(pv, nodes, w.coefficients)) * pvv);
      backward += pv.weight * (zz.dot(scalar_grad_at(pv, nodes, phi.coefficients)) * wv);
    }
  }
  return form == AdvectionForm::raw ? forward : 0.5 * (forward - backward);
}

SparseOperator assemble_c_linearized(const SpaceSet& s, const Field& frozen, AdvectionSlot slot,
                                     AdvectionForm form) {
  const int nt = s.dimension(SpaceKind::temperature);
  if (slot == AdvectionSlot::velocity) {
    s.check(frozen, SpaceKind::velocity, "assemble_c_linearized(velocity slot)");
    CanonicalAssembler asmb(nt, nt);
    for (int e = 0; e < element_count(s); ++e) {
      const auto pts = detail::tabulate(s, e, interior_rule());
      const auto& nodes = s.element_nodes[idx(e)];
      std::vector<Vec2> zq(pts.size());
      for (std::size_t q = 0; q < pts.size(); ++q) zq[q] = velocity_at(pts[q], nodes, frozen.coefficients);
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
          double v = 0.0;  // c(z, φ_j, φ_i)
          for (std::size_t q = 0; q < pts.size(); ++q) {
            v += pts[q].weight * (zq[q].dot(pts[q].grad[idx(j)]) * pts[q].n[idx(i)]);
          }
          asmb.add(nodes[idx(i)], nodes[idx(j)], v);
        }
      }
    }
    SparseOperator raw = asmb.build();
    if (form == AdvectionForm::raw) return raw;
    SparseOperator t = raw.transpose();
    return 0.5 * (raw - t);
  }

  s.check(frozen, SpaceKind::temperature, "assemble_c_linearized(scalar slot)");
  CanonicalAssembler asmb(nt, s.dimension(SpaceKind::velocity));
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, interior_rule());
    const auto& nodes = s.element_nodes[idx(e)];
    std::vector<Vec2> gwq(pts.size());
    std::vector<double> wq(pts.size());
    for (std::size_t q = 0; q < pts.size(); ++q) {
      gwq[q] = scalar_grad_at(pts[q], nodes, frozen.coefficients);
      wq[q] = scalar_at(pts[q], nodes, frozen.coefficients);
    }
    for (int i = 0; i < 6; ++i) {     // test φ_i
      for (int k = 0; k < 12; ++k) {  // trial g = N_{k/2} e_{k%2}
        double fwd = 0.0, bwd = 0.0;
        for (std::size_t q = 0; q < pts.size(); ++q) {
          const auto& pv = pts[q];
          const double gk = pv.n[idx(k / 2)];
          const Vec2& gw = gwq[q];
          const double wv = wq[q];
          fwd += pv.weight * (gk * gw[k % 2] * pv.n[idx(i)]);
          bwd += pv.weight * (gk * pv.grad[idx(i)][k % 2] * wv);
        }
        const double v = form == AdvectionForm::raw ? fwd : 0.5 * (fwd - bwd);
        asmb.add(nodes[idx(i)], 2 * nodes[idx(k / 2)] + k % 2, v);
      }
    }
  }
  return asmb.build();
}

SparseOperator assemble_buoyancy(const SpaceSet& s, double beta, const Vec2& xi) {
  if (!std::isfinite(beta) || beta < 0.0 || !xi.allFinite()) {
    throw ArgumentError("assemble_buoyancy: need finite beta >= 0 and finite gravity vector");
  }
  CanonicalAssembler asmb(s.dimension(SpaceKind::velocity), s.dimension(SpaceKind::temperature));
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, interior_rule());
    const auto& nodes = s.element_nodes[idx(e)];
    for (int i = 0; i < 12; ++i) {
      for (int j = 0; j < 6; ++j) {
        double v = 0.0;
        for (const auto& pv : pts) v += pv.weight * (pv.n[idx(i / 2)] * pv.n[idx(j)]);
        asmb.add(2 * nodes[idx(i / 2)] + i % 2, nodes[idx(j)], beta * xi[i % 2] * v);
      }
    }
  }
  return asmb.build();
}

SparseOperator assemble_h1_operator(const SpaceSet& s) {
  if (s.gamma1.nodes.empty()) throw ConfigError("H1 load: Γ₁ empty");
  CanonicalAssembler asmb(s.dimension(SpaceKind::velocity), s.gamma1.size());
  for (int edge : s.gamma1.edges) {
    const auto pts = edge_points(s, edge);
    const auto& en = s.boundary_edge_nodes[idx(edge)];
    const Vec2& n = s.mesh->boundary_edges[idx(edge)].normal;
    for (int a = 0; a < 3; ++a) {     // test node
      for (int b = 0; b < 3; ++b) {   // control node
        double v = 0.0;
        for (const auto& p : pts) v += p.weight * (p.n[idx(a)] * p.n[idx(b)]);
        const int col = s.gamma1.local_of_node[idx(en[idx(b)])];
        for (int c = 0; c < 2; ++c) {
          if (n[c] != 0.0) asmb.add(2 * en[idx(a)] + c, col, v * n[c]);
        }
      }
    }
  }
  return asmb.build();
}

SparseOperator assemble_h2_operator(const SpaceSet& s) {
  CanonicalAssembler asmb(s.dimension(SpaceKind::temperature), s.gamma2.size());
  for (int edge : s.gamma2.edges) {
    const auto pts = edge_points(s, edge);
    const auto& en = s.boundary_edge_nodes[idx(edge)];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        double v = 0.0;
        for (const auto& p : pts) v += p.weight * (p.n[idx(a)] * p.n[idx(b)]);
        asmb.add(en[idx(a)], s.gamma2.local_of_node[idx(en[idx(b)])], v);
      }
    }
  }
  return asmb.build();
}

SparseOperator assemble_boundary_mass(const SpaceSet& s, BoundaryTag tag) {
  const BoundaryNodes& bn = tag == BoundaryTag::gamma1 ? s.gamma1 : s.gamma2;
  CanonicalAssembler asmb(bn.size(), bn.size());
  for (int edge : bn.edges) {
    const auto pts = edge_points(s, edge);
    const auto& en = s.boundary_edge_nodes[idx(edge)];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        double v = 0.0;
        for (const auto& p : pts) v += p.weight * (p.n[idx(a)] * p.n[idx(b)]);
        asmb.add(bn.local_of_node[idx(en[idx(a)])], bn.local_of_node[idx(en[idx(b)])], v);
      }
    }
  }
  return asmb.build();
}

Eigen::VectorXd assemble_H1_load(const SpaceSet& s, const Eigen::VectorXd& v1) {
  if (v1.size() != s.gamma1.size()) {
    throw ArgumentError("assemble_H1_load: expected " + std::to_string(s.gamma1.size()) +
                        " Γ₁ values, got " + std::to_string(v1.size()));
  }
  return assemble_h1_operator(s) * v1;
}

Eigen::VectorXd assemble_H2_load(const SpaceSet& s, const Eigen::VectorXd& v2) {
  if (v2.size() != s.gamma2.size()) {
    throw ArgumentError("assemble_H2_load: expected " + std::to_string(s.gamma2.size()) +
                        " Γ₂ values, got " + std::to_string(v2.size()));
  }
  return assemble_h2_operator(s) * v2;
}

Eigen::VectorXd normal_trace(const SpaceSet& s, const Field& z) {
  s.check(z, SpaceKind::velocity, "normal_trace");
  Eigen::VectorXd out(s.gamma1.size());
  for (int i = 0; i < s.gamma1.size(); ++i) {
    const int node = s.gamma1.nodes[idx(i)];
    out[i] = Vec2(z.coefficients[2 * node], z.coefficients[2 * node + 1]).dot(s.gamma1.normals[idx(i)]);
  }
  return out;
}

Eigen::VectorXd scalar_trace(const SpaceSet& s, const Field& w, BoundaryTag tag) {
  s.check(w, SpaceKind::temperature, "scalar_trace");
  const BoundaryNodes& bn = tag == BoundaryTag::gamma1 ? s.gamma1 : s.gamma2;
  Eigen::VectorXd out(bn.size());
  for (int i = 0; i < bn.size(); ++i) out[i] = w.coefficients[bn.nodes[idx(i)]];
  return out;
}

Eigen::VectorXd assemble_velocity_load(const SpaceSet& s, const std::function<Vec2(double, double)>& f,
                                       int degree) {
  const QuadratureRule rule = quadrature_rule(degree);
  Eigen::VectorXd load = Eigen::VectorXd::Zero(s.dimension(SpaceKind::velocity));
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, rule);
    const auto& nodes = s.element_nodes[idx(e)];
    for (const auto& pv : pts) {
      const Vec2 fv = f(pv.x.x(), pv.x.y());
      for (int a = 0; a < 6; ++a) {
        load[2 * nodes[idx(a)]] += pv.weight * fv.x() * pv.n[idx(a)];
        load[2 * nodes[idx(a)] + 1] += pv.weight * fv.y() * pv.n[idx(a)];
      }
    }
  }
  return load;
}

Eigen::VectorXd assemble_scalar_load(const SpaceSet& s, const std::function<double(double, double)>& f,
                                     int degree) {
  const QuadratureRule rule = quadrature_rule(degree);
  Eigen::VectorXd load = Eigen::VectorXd::Zero(s.dimension(SpaceKind::temperature));
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, rule);
    const auto& nodes = s.element_nodes[idx(e)];
    for (const auto& pv : pts) {
      const double fv = f(pv.x.x(), pv.x.y());
      for (int a = 0; a < 6; ++a) load[nodes[idx(a)]] += pv.weight * fv * pv.n[idx(a)];
    }
  }
  return load;
}

double velocity_l2_error(const SpaceSet& s, const Field& z, const std::function<Vec2(double, double)>& exact,
                         int degree) {
  s.check(z, SpaceKind::velocity, "velocity_l2_error");
  const QuadratureRule rule = quadrature_rule(degree);
  double sum = 0.0;
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, rule);
    const auto& nodes = s.element_nodes[idx(e)];
    for (const auto& pv : pts) {
      sum += pv.weight * (velocity_at(pv, nodes, z.coefficients) - exact(pv.x.x(), pv.x.y())).squaredNorm();
    }
  }
  return std::sqrt(sum);
}

double scalar_l2_error(const SpaceSet& s, const Field& w, const std::function<double(double, double)>& exact,
                       int degree) {
  s.check(w, SpaceKind::temperature, "scalar_l2_error");
  const QuadratureRule rule = quadrature_rule(degree);
  double sum = 0.0;
  for (int e = 0; e < element_count(s); ++e) {
    const auto pts = detail::tabulate(s, e, rule);
    const auto& nodes = s.element_nodes[idx(e)];
    for (const auto& pv : pts) {
      const double d = scalar_at(pv, nodes, w.coefficients) - exact(pv.x.x(), pv.x.y());
      sum += pv.weight * d * d;
    }
  }
  return std::sqrt(sum);
}

namespace {

// Element containing x and its reference coordinates.
std::pair<int, QuadratureRule::Point> locate(const SpaceSet& s, const Vec2& x) {
  for (int e = 0; e < element_count(s); ++e) {
    const auto& tri = s.mesh->triangles[idx(e)];
    const Vec2& p0 = s.mesh->vertices[idx(tri[0])];
    Eigen::Matrix2d jac;
    jac.col(0) = s.mesh->vertices[idx(tri[1])] - p0;
    jac.col(1) = s.mesh->vertices[idx(tri[2])] - p0;
    const Vec2 r = jac.inverse() * (x - p0);
    constexpr double tol = 1e-12;
    if (r.x() >= -tol && r.y() >= -tol && r.x() + r.y() <= 1.0 + tol) return {e, {r.x(), r.y()}};
  }
  throw ArgumentError("point outside the mesh");
}

}  // namespace

Vec2 evaluate_velocity(const SpaceSet& s, const Field& z, const Vec2& x) {
  s.check(z, SpaceKind::velocity, "evaluate_velocity");
  const auto [e, r] = locate(s, x);
  const auto n = detail::quadratic_basis(r.xi, r.eta);
  Vec2 v = Vec2::Zero();
  for (int a = 0; a < 6; ++a) {
    const int node = s.element_nodes[idx(e)][idx(a)];
    v += n[idx(a)] * Vec2(z.coefficients[2 * node], z.coefficients[2 * node + 1]);
  }
  return v;
}

double evaluate_scalar(const SpaceSet& s, const Field& w, const Vec2& x) {
  const auto [e, r] = locate(s, x);
  const auto& nodes = s.element_nodes[idx(e)];
  if (w.space == SpaceKind::pressure) {
    const double l[3] = {1.0 - r.xi - r.eta, r.xi, r.eta};
    return l[0] * w.coefficients[nodes[0]] + l[1] * w.coefficients[nodes[1]] + l[2] * w.coefficients[nodes[2]];
  }
  s.check(w, SpaceKind::temperature, "evaluate_scalar");
  const auto n = detail::quadratic_basis(r.xi, r.eta);
  double v = 0.0;
  for (int a = 0; a < 6; ++a) v += n[idx(a)] * w.coefficients[nodes[idx(a)]];
  return v;
}

SparseOperator coercivity_velocity_operator(const SpaceSet& s) {
  const SparseOperator a = assemble_a1(s) + assemble_grad_div(s);
  return s.velocity.restrict_cols(s.velocity.restrict_rows(a));
}

namespace {

struct InverseIteration {
  double value;
  int iterations;
};

// Smallest λ with A x = λ B x for SPD A, B.
InverseIteration smallest_eigenvalue(const SparseOperator& a, const SparseOperator& b, double tol,
                                     int max_iterations, const char* what) {
  Eigen::SimplicialLDLT<SparseOperator> solver(a);
  if (solver.info() != Eigen::Success) {
    throw SolverError(std::string("estimate_coercivity: ") + what + " operator is not positive definite");
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  Eigen::VectorXd x(a.rows());
  for (auto& v : x) v = dist(rng);
  x /= std::sqrt(x.dot(b * x));
  double previous = x.dot(a * x);
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::VectorXd y = solver.solve(b * x);
    const double by = y.dot(b * y);
    const double rq = y.dot(a * y) / by;
    x = y / std::sqrt(by);
    // The Rayleigh quotient converges monotonically from above; stopping on
    // a step far below the tolerance keeps the remaining error under it.
    if (std::abs(previous - rq) <= 1e-3 * tol * std::abs(rq)) return {rq, it};
    previous = rq;
  }
  throw SolverError(std::string("estimate_coercivity: ") + what + " inverse iteration did not converge in " +
                    std::to_string(max_iterations) + " iterations");
}

}  // namespace

CoercivityEstimate estimate_coercivity(const SpaceSet& s, double tolerance, int max_iterations) {
  CoercivityEstimate out;
  {
    const SparseOperator a = coercivity_velocity_operator(s);
    SparseOperator gram = assemble_mass(s, SpaceKind::velocity) + assemble_velocity_stiffness(s);
    gram = s.velocity.restrict_cols(s.velocity.restrict_rows(gram));
    const auto r = smallest_eigenvalue(a, gram, tolerance, max_iterations, "velocity");
    out.velocity = r.value;
    out.velocity_iterations = r.iterations;
  }
  {
    const SparseOperator a2 = assemble_a2(s);
    SparseOperator a = s.temperature.restrict_cols(s.temperature.restrict_rows(a2));
    SparseOperator gram = assemble_mass(s, SpaceKind::temperature) + a2;
    gram = s.temperature.restrict_cols(s.temperature.restrict_rows(gram));
    const auto r = smallest_eigenvalue(a, gram, tolerance, max_iterations, "temperature");
    out.temperature = r.value;
    out.temperature_iterations = r.iterations;
  }
  return out;
}

}  // namespace flexctl
