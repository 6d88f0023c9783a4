#pragma once

#include "flexctl/forward.hpp"
#include "flexctl/sensitivity.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace flexctl {

/// Throws ArgumentError unless 0 < lower ≤ upper on matching grids.
void check_bounds(const ControlBounds& bounds, const char* what);

/// Componentwise clip into [lower, upper].
ControlTrajectory project_admissible(const ControlTrajectory& v, const ControlBounds& bounds);

/// σ > 0 → upper, otherwise lower (σ = 0 picks the lower bound).
ControlTrajectory bang_bang(const SwitchingFields& sigma, const ControlBounds& bounds);

/// Σ weight·σ·(a − b) over both boundaries, nodes and steps.
double weighted_pairing(const SwitchingFields& sigma, const ControlTrajectory& a, const ControlTrajectory& b);

/// pairing(σ, bang_bang(σ) − v); nonnegative for admissible v.
double fw_gap(const ControlTrajectory& v, const SwitchingFields& sigma, const ControlBounds& bounds);

/// Largest pairing(σ, ṽ − v) over `samples` uniform random admissible ṽ and
/// the bang-bang vertex. Nonpositive (up to roundoff) at a maximizer of the pairing.
double vi_residual(const ControlTrajectory& v, const SwitchingFields& sigma, const ControlBounds& bounds, int samples,
                   std::uint64_t seed = 1);

/// Σ weight·|σ|·(upper − lower): natural size of the pairings above.
double pairing_scale(const SwitchingFields& sigma, const ControlBounds& bounds);

/// (node, step) pairs with |σ| > sigma_tol·‖σ‖∞ where v is farther than
/// deviation_tol·(upper − lower) from the bang-bang value.
int count_bang_bang_violations(const ControlTrajectory& v, const SwitchingFields& sigma, const ControlBounds& bounds,
                               double sigma_tol = 1e-6, double deviation_tol = 1e-6);

enum class OptimizationMethod { conditional_gradient, projected_gradient };
enum class Termination { gap_tol, max_iter, stalled_line_search };

std::string to_string(OptimizationMethod m);
std::string to_string(Termination t);

struct OptimizationOptions {
  OptimizationMethod method = OptimizationMethod::conditional_gradient;
  double gap_tol = 1e-6;  // relative to 1 + |J|
  int max_iter = 50;
  double armijo = 1e-4;
  int max_halvings = 30;
};

struct OptimizationResult {
  ControlTrajectory control;
  std::vector<double> cost_history;  // J at the initial and every accepted iterate
  std::vector<double> gap_history;   // fw_gap at each iterate where a gradient was taken
  int iterations = 0;                // gradients evaluated
  Termination reason = Termination::max_iter;
  StateTrajectory state;             // at `control`
  ControlGradient gradient;          // last one taken; at `control` unless the cap stopped the loop
};

/// Minimizes J over the admissible box. Each iteration runs forward, adjoint
/// and gradient, then either steps toward the bang-bang vertex of −∇J
/// (conditional gradient, λ ∈ [0, 1]) or along the projected gradient, with
/// halving backtracking and an Armijo test.
OptimizationResult optimize(const ForwardModel& model, const ControlTrajectory& initial,
                            const OptimizationOptions& options = {});

}  // namespace flexctl
