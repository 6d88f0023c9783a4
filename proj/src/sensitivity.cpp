#include "flexctl/sensitivity.hpp"

#include "flexctl/error.hpp"

#include <cmath>
#include <string>

namespace flexctl {

namespace {

SparseOperator restrict_both(const DofConstraints& c, const SparseOperator& op) {
  return c.restrict_cols(c.restrict_rows(op));
}

void check_base(const ForwardModel& model, const StateTrajectory& base, const char* what) {
  if (static_cast<int>(base.states.size()) != model.spec().steps + 1) {
    throw ArgumentError(std::string(what) + ": base trajectory has " + std::to_string(base.states.size()) +
                        " states, expected " + std::to_string(model.spec().steps + 1));
  }
}

}  // namespace

LinearizedTrajectory run_linearized(const ForwardModel& model, const StateTrajectory& base,
                                    const ControlTrajectory& delta, double epsilon) {
  check_base(model, base, "run_linearized");
  model.check_controls(delta, "run_linearized");
  if (!(epsilon >= 0.0)) throw ArgumentError("run_linearized: epsilon must be >= 0");
  const SpaceSet& s = model.spaces();
  const Operators& o = model.ops();
  const ProblemSpec& p = model.spec();
  const double dt = p.dt();
  const SparseOperator d = s.velocity.restrict_cols(o.div);

  LinearizedTrajectory lin;
  lin.velocity.push_back(s.zero(SpaceKind::velocity));
  lin.pressure.push_back(s.zero(SpaceKind::pressure));
  lin.temperature.push_back(s.zero(SpaceKind::temperature));
  for (int n = 0; n < p.steps; ++n) {
    const auto un = static_cast<std::size_t>(n);
    const State& prev = base.states[un];
    const State& next = base.states[un + 1];
    const Field& g = lin.velocity[un];
    const Field& eta = lin.temperature[un];
    try {
      SparseOperator k = model.velocity_operator(prev.velocity);
      if (epsilon > 0.0) k += epsilon * assemble_b_linearized(s, g, FrozenSlot::first);
      const SparseOperator coupling = assemble_b_linearized(s, next.velocity, FrozenSlot::second);
      const Eigen::VectorXd rv = o.velocity_mass * g.coefficients / dt - coupling * g.coefficients -
                                 model.buoyancy() * eta.coefficients + o.h1 * delta.v1.col(n);
      const SaddleSolver saddle(restrict_both(s.velocity, k), d, false, "linearized velocity block");
      Field g_new = s.zero(SpaceKind::velocity);
      Field dp = s.zero(SpaceKind::pressure);
      Eigen::VectorXd gf;
      saddle.solve(s.velocity.restrict(rv), Eigen::VectorXd::Zero(d.rows()), gf, dp.coefficients);
      g_new.coefficients = s.velocity.extend(gf);

      SparseOperator t = model.temperature_operator(next.velocity);
      if (epsilon > 0.0) t += epsilon * assemble_c_linearized(s, g_new, AdvectionSlot::velocity, AdvectionForm::skew);
      const SparseOperator advect = assemble_c_linearized(s, next.temperature, AdvectionSlot::scalar, AdvectionForm::skew);
      const Eigen::VectorXd rw =
          o.temperature_mass * eta.coefficients / dt - advect * g_new.coefficients + o.h2 * delta.v2.col(n);
      Field eta_new = s.zero(SpaceKind::temperature);
      eta_new.coefficients = s.temperature.extend(
          solve_checked(restrict_both(s.temperature, t), s.temperature.restrict(rw), "linearized temperature block"));

      lin.velocity.push_back(std::move(g_new));
      lin.pressure.push_back(std::move(dp));
      lin.temperature.push_back(std::move(eta_new));
    } catch (const SolverError& e) {
      throw SolverError("linearized step " + std::to_string(n + 1) + ": " + e.what());
    }
  }
  return lin;
}

AdjointTrajectory run_adjoint(const ForwardModel& model, const StateTrajectory& base, AdjointSource source) {
  check_base(model, base, "run_adjoint");
  const SpaceSet& s = model.spaces();
  const Operators& o = model.ops();
  const ProblemSpec& p = model.spec();
  const int nt = p.steps;
  const double dt = p.dt();
  const bool temperature_source = source == AdjointSource::trace || p.cost_form == CostForm::trace;
  const SparseOperator d = s.velocity.restrict_cols(o.div);
  const SparseOperator buoy_t = SparseOperator(model.buoyancy().transpose());

  AdjointTrajectory adj;
  adj.source = source;
  const auto count = static_cast<std::size_t>(nt + 1);
  adj.velocity.assign(count, s.zero(SpaceKind::velocity));
  adj.pressure.assign(count, s.zero(SpaceKind::pressure));
  adj.temperature.assign(count, s.zero(SpaceKind::temperature));

  // λᵐ, μᵐ, θᵐ: multipliers of the tangent step m, stored scaled by 1/dt at index m − 1.
  Eigen::VectorXd lambda_next = Eigen::VectorXd::Zero(s.dimension(SpaceKind::velocity));
  Eigen::VectorXd theta_next = Eigen::VectorXd::Zero(s.dimension(SpaceKind::temperature));
  for (int m = nt; m >= 1; --m) {
    const auto um = static_cast<std::size_t>(m);
    const State& cur = base.states[um];
    const State& prev = base.states[um - 1];
    try {
      Eigen::VectorXd rw = o.temperature_mass * theta_next / dt - buoy_t * lambda_next;
      if (temperature_source) rw += dt * p.n2 * (o.h2 * p.r2.col(m - 1));
      const SparseOperator t = restrict_both(s.temperature, model.temperature_operator(cur.velocity));
      const Eigen::VectorXd theta =
          s.temperature.extend(solve_checked(SparseOperator(t.transpose()), s.temperature.restrict(rw),
                                             "adjoint temperature block"));

      Eigen::VectorXd rv = dt * p.n1 * (o.h1 * p.r1.col(m - 1)) + o.velocity_mass * lambda_next / dt;
      const SparseOperator advect = assemble_c_linearized(s, cur.temperature, AdvectionSlot::scalar, AdvectionForm::skew);
      rv -= advect.transpose() * theta;
      if (m < nt) {
        const SparseOperator coupling = assemble_b_linearized(s, base.states[um + 1].velocity, FrozenSlot::second);
        rv -= coupling.transpose() * lambda_next;
      }
      const SparseOperator k = restrict_both(s.velocity, model.velocity_operator(prev.velocity));
      const SaddleSolver saddle(k, d, true, "adjoint velocity block");
      Eigen::VectorXd lf, mu;
      saddle.solve(s.velocity.restrict(rv), Eigen::VectorXd::Zero(d.rows()), lf, mu);
      const Eigen::VectorXd lambda = s.velocity.extend(lf);

      adj.velocity[um - 1].coefficients = lambda / dt;
      adj.pressure[um - 1].coefficients = mu / dt;
      adj.temperature[um - 1].coefficients = theta / dt;
      lambda_next = lambda;
      theta_next = theta;
    } catch (const SolverError& e) {
      throw SolverError("adjoint step " + std::to_string(m) + ": " + e.what());
    }
  }
  return adj;
}

SwitchingFields switching_fields(const ForwardModel& model, const AdjointTrajectory& adj) {
  const SpaceSet& s = model.spaces();
  const ProblemSpec& p = model.spec();
  if (static_cast<int>(adj.velocity.size()) != p.steps + 1) {
    throw ArgumentError("switching_fields: adjoint trajectory does not match the time grid");
  }
  const int n1 = s.gamma1.size(), n2 = s.gamma2.size();
  SwitchingFields f{BoundarySeries(n1, p.steps), BoundarySeries(n2, p.steps), BoundarySeries(n1, p.steps),
                    BoundarySeries(n2, p.steps)};
  const double dt = p.dt();
  for (int m = 1; m <= p.steps; ++m) {
    const auto idx = static_cast<std::size_t>(m - 1);
    f.sigma1.col(m - 1) = normal_trace(s, adj.velocity[idx]);
    f.sigma2.col(m - 1) = scalar_trace(s, adj.temperature[idx], BoundaryTag::gamma2);
    for (int i = 0; i < n1; ++i) f.weight1(i, m - 1) = p.n1 * dt * s.gamma1.weights[static_cast<std::size_t>(i)];
    for (int i = 0; i < n2; ++i) f.weight2(i, m - 1) = p.n2 * dt * s.gamma2.weights[static_cast<std::size_t>(i)];
  }
  return f;
}

ControlGradient discrete_gradient(const ForwardModel& model, const StateTrajectory& base,
                                  const AdjointTrajectory& adj) {
  check_base(model, base, "discrete_gradient");
  const ProblemSpec& p = model.spec();
  if (adj.source != AdjointSource::cost) {
    throw ArgumentError("discrete_gradient: adjoint must carry the cost sources");
  }
  if (static_cast<int>(adj.velocity.size()) != p.steps + 1 || static_cast<int>(adj.temperature.size()) != p.steps + 1) {
    throw ArgumentError("discrete_gradient: adjoint trajectory does not match the time grid");
  }
  const Operators& o = model.ops();
  const SpaceSet& s = model.spaces();
  const double dt = p.dt();
  ControlGradient g{BoundarySeries(s.gamma1.size(), p.steps), BoundarySeries(s.gamma2.size(), p.steps)};
  for (int m = 1; m <= p.steps; ++m) {
    const auto idx = static_cast<std::size_t>(m - 1);
    g.d1.col(m - 1) = dt * (o.h1.transpose() * adj.velocity[idx].coefficients);
    g.d2.col(m - 1) = dt * (o.h2.transpose() * adj.temperature[idx].coefficients);
    if (p.cost_form == CostForm::flux) {
      g.d2.col(m - 1) -= p.n2 * dt / p.conductivity * (o.gamma2_mass * p.r2.col(m - 1));
    }
  }
  return g;
}

SwitchingFields descent_fields(const ControlGradient& gradient) {
  return {-gradient.d1, -gradient.d2, BoundarySeries::Ones(gradient.d1.rows(), gradient.d1.cols()),
          BoundarySeries::Ones(gradient.d2.rows(), gradient.d2.cols())};
}

double tangent_pairing(const ForwardModel& model, const LinearizedTrajectory& lin) {
  const ProblemSpec& p = model.spec();
  const Operators& o = model.ops();
  double total = 0.0;
  for (int n = 1; n <= p.steps; ++n) {
    const auto un = static_cast<std::size_t>(n);
    total += p.dt() * (p.n1 * (o.h1 * p.r1.col(n - 1)).dot(lin.velocity[un].coefficients) +
                       p.n2 * (o.h2 * p.r2.col(n - 1)).dot(lin.temperature[un].coefficients));
  }
  return total;
}

double adjoint_pairing(const ForwardModel& model, const AdjointTrajectory& adj, const ControlTrajectory& delta) {
  const ProblemSpec& p = model.spec();
  const Operators& o = model.ops();
  model.check_controls(delta, "adjoint_pairing");
  double total = 0.0;
  for (int n = 1; n <= p.steps; ++n) {
    const auto idx = static_cast<std::size_t>(n - 1);
    total += p.dt() * ((o.h1 * delta.v1.col(n - 1)).dot(adj.velocity[idx].coefficients) +
                       (o.h2 * delta.v2.col(n - 1)).dot(adj.temperature[idx].coefficients));
  }
  return total;
}

SmallnessDiagnostic smallness_condition(const ProblemSpec& spec, const CoercivityEstimate& constants) {
  const double b = spec.expansion * spec.gravity.cwiseAbs().maxCoeff();
  SmallnessDiagnostic d;
  d.lhs = b * (b + 1.0) / (spec.viscosity * constants.velocity);
  d.rhs = spec.conductivity * constants.temperature / 4.0;
  d.ratio = d.lhs / d.rhs;
  return d;
}

}  // namespace flexctl
