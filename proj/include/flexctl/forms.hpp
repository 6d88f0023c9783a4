#pragma once

#include "flexctl/spaces.hpp"

#include <functional>

namespace flexctl {

// Assembled operators act on full (unconstrained) coefficient vectors; rows
// index test functions, columns trial functions. Contributions are merged in
// a canonical order, so the result is bitwise independent of triangle order.

/// (u, ψ) on the velocity, pressure or temperature space.
SparseOperator assemble_mass(const SpaceSet& spaces, SpaceKind kind);

/// a₁(u, ψ) = ∫ rot u · rot ψ, with rot u = ∂u₂/∂x − ∂u₁/∂y.
SparseOperator assemble_a1(const SpaceSet& spaces);

/// a₂(w, φ) = ∫ ∇w · ∇φ on the temperature space.
SparseOperator assemble_a2(const SpaceSet& spaces);

/// Σ_c ∫ ∇u_c · ∇ψ_c; with the mass matrix it forms the H¹ Gram matrix.
SparseOperator assemble_velocity_stiffness(const SpaceSet& spaces);

/// ∫ div u div ψ.
SparseOperator assemble_grad_div(const SpaceSet& spaces);

/// Rows: pressure test χ, columns: velocity trial z; entries ∫ (div z) χ.
SparseOperator assemble_div(const SpaceSet& spaces);

/// b(u, v, w) = ∫ (rot u ê₃ × v) · w = ∫ rot u (v₁w₂ − v₂w₁).
double apply_b(const SpaceSet& spaces, const Field& u, const Field& v, const Field& w);

enum class FrozenSlot { first, second };

/// first:  ψᵀ(op·v) = b(frozen, v, ψ)
/// second: ψᵀ(op·g) = b(g, frozen, ψ)
SparseOperator assemble_b_linearized(const SpaceSet& spaces, const Field& frozen, FrozenSlot slot);

enum class AdvectionForm { raw, skew };

/// raw: ∫ (z · ∇w) φ; skew: ½[c(z, w, φ) − c(z, φ, w)].
double apply_c(const SpaceSet& spaces, const Field& z, const Field& w, const Field& phi,
               AdvectionForm form);

enum class AdvectionSlot { velocity, scalar };

/// velocity: frozen z; temperature × temperature operator, φᵀ(op·w) = c(z, w, φ).
/// scalar:   frozen w; temperature × velocity operator,    φᵀ(op·g) = c(g, w, φ).
SparseOperator assemble_c_linearized(const SpaceSet& spaces, const Field& frozen, AdvectionSlot slot,
                                     AdvectionForm form = AdvectionForm::skew);

/// Rows velocity, columns temperature; entries β ∫ w (ξ · ψ).
SparseOperator assemble_buoyancy(const SpaceSet& spaces, double beta, const Vec2& xi);

/// Rows velocity dofs, columns Γ₁ nodes: ∫_{Γ₁} φ_j (ψ · n) ds.
/// Applied to nodal v₁ it gives the load ⟨H₁v₁, ψ⟩.
SparseOperator assemble_h1_operator(const SpaceSet& spaces);

/// Rows temperature dofs, columns Γ₂ nodes: ∫_{Γ₂} φ_j φ ds.
SparseOperator assemble_h2_operator(const SpaceSet& spaces);

/// ∫_{Γ_i} φ_j φ_k ds between boundary nodes of one tag.
SparseOperator assemble_boundary_mass(const SpaceSet& spaces, BoundaryTag tag);

/// Load vectors ⟨H₁v₁, ψ⟩ and ⟨H₂v₂, φ⟩ for nodal boundary values.
Eigen::VectorXd assemble_H1_load(const SpaceSet& spaces, const Eigen::VectorXd& v1);
Eigen::VectorXd assemble_H2_load(const SpaceSet& spaces, const Eigen::VectorXd& v2);

/// z · n at every Γ₁ node (corner nodes use the averaged normal).
Eigen::VectorXd normal_trace(const SpaceSet& spaces, const Field& z);

/// Nodal values of a temperature-space field on one boundary tag.
Eigen::VectorXd scalar_trace(const SpaceSet& spaces, const Field& w, BoundaryTag tag);

/// ∫ f · ψ and ∫ f φ for body forces, with a quadrature of the given degree.
Eigen::VectorXd assemble_velocity_load(const SpaceSet& spaces,
                                       const std::function<Vec2(double, double)>& f, int degree = 10);
Eigen::VectorXd assemble_scalar_load(const SpaceSet& spaces,
                                     const std::function<double(double, double)>& f, int degree = 10);

/// ‖u_h − u‖_{L²} against an analytic field.
double velocity_l2_error(const SpaceSet& spaces, const Field& z,
                         const std::function<Vec2(double, double)>& exact, int degree = 10);
double scalar_l2_error(const SpaceSet& spaces, const Field& w,
                       const std::function<double(double, double)>& exact, int degree = 10);

/// Value of a field at a physical point (must lie in the mesh).
Vec2 evaluate_velocity(const SpaceSet& spaces, const Field& z, const Vec2& x);
double evaluate_scalar(const SpaceSet& spaces, const Field& w, const Vec2& x);

struct CoercivityEstimate {
  double velocity = 0.0;     // c₁
  double temperature = 0.0;  // c₁′
  int velocity_iterations = 0;
  int temperature_iterations = 0;
};

/// Smallest generalized eigenvalues of
///   a₁ + (div, div) vs. the H¹ Gram matrix on the constrained velocity space,
///   a₂              vs. the H¹ Gram matrix on the constrained temperature space.
/// The penalty vanishes on exactly divergence-free fields. Restricting a₁ to the
/// discretely divergence-free subspace instead is not coercive: rot-free fields
/// with zero pressure pairings exist once the mesh is fine enough.
/// Inverse iteration; throws SolverError after `max_iterations`.
CoercivityEstimate estimate_coercivity(const SpaceSet& spaces, double tolerance = 1e-8,
                                       int max_iterations = 20000);

/// The penalized velocity operator used above, on free dofs (tests use it
/// with a dense eigensolver).
SparseOperator coercivity_velocity_operator(const SpaceSet& spaces);

}  // namespace flexctl
