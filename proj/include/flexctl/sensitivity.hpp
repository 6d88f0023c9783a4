#pragma once

#include "flexctl/forms.hpp"
#include "flexctl/forward.hpp"

#include <vector>

namespace flexctl {

/// Perturbations (g, δP, η) per time index n = 0..Nt; g⁰ = η⁰ = 0.
struct LinearizedTrajectory {
  std::vector<Field> velocity;
  std::vector<Field> pressure;
  std::vector<Field> temperature;
};

/// Tangent of the forward scheme at `base` in the direction `delta`.
/// With epsilon > 0 the step also carries the quadratic terms
///   ε b(gⁿ, gⁿ⁺¹, ·) and ε c_skew(gⁿ⁺¹, ηⁿ⁺¹, ·),
/// so the result equals (Run(v + εδ) − Run(v))/ε exactly. The forward scheme
/// lags convection, so both terms are linear in the unknowns of the step.
LinearizedTrajectory run_linearized(const ForwardModel& model, const StateTrajectory& base,
                                    const ControlTrajectory& delta, double epsilon = 0.0);

/// trace: sources N₁H₁r₁ and N₂H₂r₂ (the trace pairing).
/// cost:  the sources that differentiate the implemented J; with the flux form
///        the N₂ term of J depends on v₂ directly and adds no state source.
enum class AdjointSource { trace, cost };

/// (p, multiplier, q) per time index n = 0..Nt with pᴺᵗ = qᴺᵗ = 0. Control
/// step n pairs with pⁿ⁻¹ and qⁿ⁻¹.
struct AdjointTrajectory {
  AdjointSource source = AdjointSource::cost;
  std::vector<Field> velocity;
  std::vector<Field> pressure;
  std::vector<Field> temperature;
};

/// Backward march whose step matrices are the transposes of the tangent ones.
AdjointTrajectory run_adjoint(const ForwardModel& model, const StateTrajectory& base,
                              AdjointSource source = AdjointSource::cost);

/// Boundary-node × step fields with pairing weights: the pairing of σ with a
/// control change δv is Σ weight·σ·δv over both boundaries.
struct SwitchingFields {
  BoundarySeries sigma1;
  BoundarySeries sigma2;
  BoundarySeries weight1;
  BoundarySeries weight2;
};

/// σ₁ = p·n on Γ₁ and σ₂ = q on Γ₂ at the adjoint index paired with each
/// control step, weighted by N_i · dt · (nodal boundary weight).
SwitchingFields switching_fields(const ForwardModel& model, const AdjointTrajectory& adj);

struct ControlGradient {
  BoundarySeries d1;  // ∂J/∂v₁, Γ₁ nodes × Nt
  BoundarySeries d2;  // ∂J/∂v₂, Γ₂ nodes × Nt
};

/// Exact gradient of evaluate_cost. Needs an adjoint built with the cost
/// sources from the same trajectory.
ControlGradient discrete_gradient(const ForwardModel& model, const StateTrajectory& base,
                                  const AdjointTrajectory& adj);

/// σ̂ = −∇J with unit weights: the field the optimizer drives to a vertex.
SwitchingFields descent_fields(const ControlGradient& gradient);

/// N₁ Σ dt⟨H₁r₁, gⁿ⟩ + N₂ Σ dt⟨H₂r₂, ηⁿ⟩.
double tangent_pairing(const ForwardModel& model, const LinearizedTrajectory& lin);

/// Σ dt⟨H₁δv₁ⁿ, pⁿ⁻¹⟩ + Σ dt⟨H₂δv₂ⁿ, qⁿ⁻¹⟩.
double adjoint_pairing(const ForwardModel& model, const AdjointTrajectory& adj, const ControlTrajectory& delta);

struct SmallnessDiagnostic {
  double lhs = 0.0;    // β‖ξ‖∞(β‖ξ‖∞ + 1)/(ν c₁)
  double rhs = 0.0;    // k c₁′ / 4
  double ratio = 0.0;  // lhs / rhs
  [[nodiscard]] bool satisfied() const { return ratio <= 1.0; }
};

SmallnessDiagnostic smallness_condition(const ProblemSpec& spec, const CoercivityEstimate& constants);

}  // namespace flexctl
