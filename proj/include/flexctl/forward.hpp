#pragma once

#include "flexctl/forms.hpp"
#include "flexctl/mesh.hpp"
#include "flexctl/spaces.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace flexctl {

/// Operators that depend only on the mesh.
struct Operators {
  SparseOperator velocity_mass;
  SparseOperator a1;
  SparseOperator grad_div;
  SparseOperator div;  // pressure × velocity
  SparseOperator temperature_mass;
  SparseOperator a2;
  SparseOperator h1;            // velocity × Γ₁ nodes
  SparseOperator h2;            // temperature × Γ₂ nodes
  SparseOperator gamma2_mass;   // Γ₂ nodes × Γ₂ nodes
};

/// Mesh, spaces and operators, built once and shared read-only.
struct Discretization {
  Mesh mesh;
  SpaceSet spaces;
  Operators ops;

  Discretization() = default;
  Discretization(const Discretization&) = delete;
  Discretization& operator=(const Discretization&) = delete;
};

std::shared_ptr<const Discretization> discretize(Mesh mesh);

/// Values per boundary node (rows) and time step n = 1..Nt (column n − 1).
using BoundarySeries = Eigen::MatrixXd;

struct ControlTrajectory {
  BoundarySeries v1;  // Γ₁ nodes × Nt, scalar normal magnitude
  BoundarySeries v2;  // Γ₂ nodes × Nt

  [[nodiscard]] int steps() const { return static_cast<int>(v1.cols()); }
};

struct ControlBounds {
  BoundarySeries lower1, upper1;
  BoundarySeries lower2, upper2;
};

enum class CostForm { flux, trace };

/// flux:  J = N₁ Σ dt ∫_{Γ₁} r₁ z·n + N₂ Σ dt ∫_{Γ₂} r₂ (−v₂/k)
/// trace: the second term becomes N₂ Σ dt ∫_{Γ₂} r₂ w.
struct ProblemSpec {
  double viscosity = 1.0;
  double conductivity = 1.0;
  double expansion = 0.1;
  Vec2 gravity{0.0, -1.0};

  double n1 = 1.0;
  double n2 = 1.0;
  CostForm cost_form = CostForm::flux;
  BoundarySeries r1;
  BoundarySeries r2;
  ControlBounds bounds;

  double final_time = 0.5;
  int steps = 10;

  std::function<Vec2(double, double)> initial_velocity;      // empty: zero
  std::function<double(double, double)> initial_temperature;  // empty: zero

  // Body forces (x, y, t); empty means none. Used by manufactured solutions.
  std::function<Vec2(double, double, double)> velocity_forcing;
  std::function<double(double, double, double)> temperature_forcing;

  [[nodiscard]] double dt() const { return steps > 0 ? final_time / steps : 0.0; }
};

/// Γ₁ × Nt and Γ₂ × Nt series filled with one value.
ControlTrajectory constant_controls(const SpaceSet& spaces, int steps, double v1, double v2);
ControlBounds constant_bounds(const SpaceSet& spaces, int steps, double lower1, double upper1,
                              double lower2, double upper2);

struct State {
  Field velocity;
  Field pressure;  // total pressure multiplier
  Field temperature;
};

struct StateTrajectory {
  double dt = 0.0;
  std::vector<State> states;              // n = 0..Nt
  std::vector<double> divergence_residual;  // max |D zⁿ| per state
};

struct EnergyRow {
  double time = 0.0;
  double kinetic = 0.0;  // |zⁿ|
  double velocity_lhs = 0.0;
  double velocity_rhs = 0.0;
  double temperature_lhs = 0.0;
  double temperature_rhs = 0.0;
  double thermal = 0.0;  // |wⁿ|

  [[nodiscard]] double velocity_margin() const { return velocity_rhs - velocity_lhs; }
  [[nodiscard]] double temperature_margin() const { return temperature_rhs - temperature_lhs; }
};

/// Implicit Euler for the coupled state. Velocity step:
///   (zⁿ⁺¹ − zⁿ)/dt + ν(A₁ + G)zⁿ⁺¹ + b(zⁿ, zⁿ⁺¹, ·) + βξwⁿ − DᵀP = H₁v₁ⁿ⁺¹,  D zⁿ⁺¹ = 0,
/// then temperature with the new velocity:
///   (wⁿ⁺¹ − wⁿ)/dt + kA₂wⁿ⁺¹ + c_skew(zⁿ⁺¹, wⁿ⁺¹, ·) = H₂v₂ⁿ⁺¹.
/// G is the grad-div form (div z, div ψ). It vanishes on divergence-free
/// fields; without it the rot-free velocities that the linear pressure cannot
/// see are left undamped.
class ForwardModel {
 public:
  /// Throws ArgumentError when the problem data do not fit the discretization.
  ForwardModel(std::shared_ptr<const Discretization> disc, ProblemSpec spec);

  [[nodiscard]] const Discretization& discretization() const { return *disc_; }
  [[nodiscard]] const SpaceSet& spaces() const { return disc_->spaces; }
  [[nodiscard]] const Operators& ops() const { return disc_->ops; }
  [[nodiscard]] const ProblemSpec& spec() const { return spec_; }
  [[nodiscard]] const SparseOperator& buoyancy() const { return buoyancy_; }
  [[nodiscard]] std::shared_ptr<const Discretization> shared_discretization() const { return disc_; }

  /// Interpolated w₀ with constraints; z₀ projected onto the discretely
  /// divergence-free constrained subspace.
  [[nodiscard]] State project_initial() const;

  /// One step to t_{n+1} = (n+1)·dt with the controls of column n.
  [[nodiscard]] State step(const State& current, int n, const ControlTrajectory& controls) const;

  /// Throws SolverError naming the failing step.
  [[nodiscard]] StateTrajectory run(const ControlTrajectory& controls) const;

  [[nodiscard]] double evaluate_cost(const StateTrajectory& traj, const ControlTrajectory& controls) const;

  [[nodiscard]] std::vector<EnergyRow> energy_report(const StateTrajectory& traj, const ControlTrajectory& controls,
                                                     const CoercivityEstimate& constants) const;

  /// M/dt + ν(A₁ + G) + b(z_prev, ·, ·), full velocity dofs.
  [[nodiscard]] SparseOperator velocity_operator(const Field& z_prev) const;
  /// M/dt + kA₂ + c_skew(z_new, ·, ·), full temperature dofs.
  [[nodiscard]] SparseOperator temperature_operator(const Field& z_new) const;

  /// Throws ArgumentError unless the controls have Nt columns on the right nodes.
  void check_controls(const ControlTrajectory& controls, const char* what) const;

 private:
  std::shared_ptr<const Discretization> disc_;
  ProblemSpec spec_;
  SparseOperator buoyancy_;
};

/// Solves the free-dof saddle system [K, −Dᵀ; −D, 0] (or its transpose) with
/// LU, iterative refinement and a 1e-10 relative residual check.
class SaddleSolver {
 public:
  SaddleSolver(const SparseOperator& k_free, const SparseOperator& d_free, bool transpose, const char* block);
  void solve(const Eigen::VectorXd& rhs_velocity, const Eigen::VectorXd& rhs_pressure, Eigen::VectorXd& velocity,
             Eigen::VectorXd& pressure) const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

/// LU solve with refinement; throws SolverError naming `block` on failure.
Eigen::VectorXd solve_checked(const SparseOperator& a, const Eigen::VectorXd& rhs, const char* block);

}  // namespace flexctl
