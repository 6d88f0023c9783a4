#include "flexctl/forward.hpp"

#include "flexctl/error.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <string>

namespace flexctl {

namespace {

constexpr double kResidualTolerance = 1e-10;
constexpr int kRefinementSteps = 4;

template <typename Solver>
Eigen::VectorXd refine(const Solver& lu, const SparseOperator& a, const Eigen::VectorXd& b, const char* block) {
  const double bn = b.norm();
  if (bn == 0.0) return Eigen::VectorXd::Zero(a.cols());
  Eigen::VectorXd x = lu.solve(b);
  for (int it = 0;; ++it) {
    const Eigen::VectorXd r = b - a * x;
    const double rn = r.norm();
    if (!std::isfinite(rn)) throw SolverError(std::string(block) + ": solve produced non-finite values");
    if (rn <= kResidualTolerance * bn) return x;
    if (it == kRefinementSteps) {
      throw SolverError(std::string(block) + ": relative residual " + std::to_string(rn / bn) +
                        " above tolerance after refinement");
    }
    x += lu.solve(r);
  }
}

SparseOperator restrict_both(const DofConstraints& c, const SparseOperator& op) {
  return c.restrict_cols(c.restrict_rows(op));
}

void check_series(const BoundarySeries& s, int rows, int cols, const std::string& what) {
  if (s.rows() != rows || s.cols() != cols) {
    throw ArgumentError(what + ": expected " + std::to_string(rows) + " x " + std::to_string(cols) + ", got " +
                        std::to_string(s.rows()) + " x " + std::to_string(s.cols()));
  }
}

}  // namespace

std::shared_ptr<const Discretization> discretize(Mesh mesh) {
  auto d = std::make_shared<Discretization>();
  d->mesh = std::move(mesh);
  d->spaces = build_spaces(d->mesh);
  const SpaceSet& s = d->spaces;
  d->ops.velocity_mass = assemble_mass(s, SpaceKind::velocity);
  d->ops.a1 = assemble_a1(s);
  d->ops.grad_div = assemble_grad_div(s);
  d->ops.div = assemble_div(s);
  d->ops.temperature_mass = assemble_mass(s, SpaceKind::temperature);
  d->ops.a2 = assemble_a2(s);
  d->ops.h1 = assemble_h1_operator(s);
  d->ops.h2 = assemble_h2_operator(s);
  d->ops.gamma2_mass = assemble_boundary_mass(s, BoundaryTag::gamma2);
  return d;
}

ControlTrajectory constant_controls(const SpaceSet& spaces, int steps, double v1, double v2) {
  return {BoundarySeries::Constant(spaces.gamma1.size(), steps, v1),
          BoundarySeries::Constant(spaces.gamma2.size(), steps, v2)};
}

ControlBounds constant_bounds(const SpaceSet& spaces, int steps, double lower1, double upper1, double lower2,
                              double upper2) {
  const int n1 = spaces.gamma1.size(), n2 = spaces.gamma2.size();
  return {BoundarySeries::Constant(n1, steps, lower1), BoundarySeries::Constant(n1, steps, upper1),
          BoundarySeries::Constant(n2, steps, lower2), BoundarySeries::Constant(n2, steps, upper2)};
}

struct SaddleSolver::Impl {
  SparseOperator matrix;
  Eigen::SparseLU<SparseOperator> lu;
  int nv = 0;
  int np = 0;
  std::string block;
};

SaddleSolver::SaddleSolver(const SparseOperator& k_free, const SparseOperator& d_free, bool transpose,
                           const char* block)
    : impl_(std::make_shared<Impl>()) {
  Impl& m = *impl_;
  m.nv = static_cast<int>(k_free.rows());
  m.np = static_cast<int>(d_free.rows());
  m.block = block;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(k_free.nonZeros() + 2 * d_free.nonZeros()));
  for (int c = 0; c < k_free.outerSize(); ++c) {
    for (SparseOperator::InnerIterator it(k_free, c); it; ++it) {
      const int r = static_cast<int>(it.row()), col = static_cast<int>(it.col());
      if (transpose) {
        t.emplace_back(col, r, it.value());
      } else {
        t.emplace_back(r, col, it.value());
      }
    }
  }
  for (int c = 0; c < d_free.outerSize(); ++c) {
    for (SparseOperator::InnerIterator it(d_free, c); it; ++it) {
      const int p = static_cast<int>(it.row()), v = static_cast<int>(it.col());
      t.emplace_back(v, m.nv + p, -it.value());
      t.emplace_back(m.nv + p, v, -it.value());
    }
  }
  m.matrix.resize(m.nv + m.np, m.nv + m.np);
  m.matrix.setFromTriplets(t.begin(), t.end());
  m.matrix.makeCompressed();
  m.lu.compute(m.matrix);
  if (m.lu.info() != Eigen::Success) throw SolverError(m.block + ": saddle system is singular");
}

void SaddleSolver::solve(const Eigen::VectorXd& rhs_velocity, const Eigen::VectorXd& rhs_pressure,
                         Eigen::VectorXd& velocity, Eigen::VectorXd& pressure) const {
  const Impl& m = *impl_;
  Eigen::VectorXd b(m.nv + m.np);
  b << rhs_velocity, rhs_pressure;
  const Eigen::VectorXd x = refine(m.lu, m.matrix, b, m.block.c_str());
  velocity = x.head(m.nv);
  pressure = x.tail(m.np);
}

Eigen::VectorXd solve_checked(const SparseOperator& a, const Eigen::VectorXd& rhs, const char* block) {
  SparseOperator m = a;
  m.makeCompressed();
  Eigen::SparseLU<SparseOperator> lu(m);
  if (lu.info() != Eigen::Success) throw SolverError(std::string(block) + ": system is singular");
  return refine(lu, m, rhs, block);
}

ForwardModel::ForwardModel(std::shared_ptr<const Discretization> disc, ProblemSpec spec)
    : disc_(std::move(disc)), spec_(std::move(spec)) {
  const ProblemSpec& p = spec_;
  auto positive = [](double v, const char* what) {
    if (!(std::isfinite(v) && v > 0.0)) throw ArgumentError(std::string(what) + " must be positive");
  };
  positive(p.viscosity, "viscosity");
  positive(p.conductivity, "conductivity");
  positive(p.final_time, "final_time");
  if (!(std::isfinite(p.expansion) && p.expansion >= 0.0)) throw ArgumentError("expansion must be >= 0");
  if (!p.gravity.allFinite()) throw ArgumentError("gravity must be finite");
  if (!(std::isfinite(p.n1) && p.n1 >= 0.0) || !(std::isfinite(p.n2) && p.n2 >= 0.0)) {
    throw ArgumentError("cost weights must be >= 0");
  }
  if (p.steps < 0) throw ArgumentError("steps must be >= 0");

  const int n1 = spaces().gamma1.size(), n2 = spaces().gamma2.size();
  if (spec_.r1.size() == 0) spec_.r1 = BoundarySeries::Zero(n1, p.steps);
  if (spec_.r2.size() == 0) spec_.r2 = BoundarySeries::Zero(n2, p.steps);
  check_series(spec_.r1, n1, p.steps, "r1");
  check_series(spec_.r2, n2, p.steps, "r2");
  const ControlBounds& b = spec_.bounds;
  if (b.lower1.size() + b.upper1.size() + b.lower2.size() + b.upper2.size() > 0) {
    check_series(b.lower1, n1, p.steps, "bounds.alpha1");
    check_series(b.upper1, n1, p.steps, "bounds.beta1");
    check_series(b.lower2, n2, p.steps, "bounds.alpha2");
    check_series(b.upper2, n2, p.steps, "bounds.beta2");
    if (!(b.lower1.array() > 0.0).all()) throw ArgumentError("bounds.alpha1 must be positive");
    if (!(b.lower2.array() > 0.0).all()) throw ArgumentError("bounds.alpha2 must be positive");
    if (!(b.upper1.array() >= b.lower1.array()).all()) throw ArgumentError("bounds.beta1 must be >= alpha1");
    if (!(b.upper2.array() >= b.lower2.array()).all()) throw ArgumentError("bounds.beta2 must be >= alpha2");
  }
  buoyancy_ = assemble_buoyancy(spaces(), p.expansion, p.gravity);
}

void ForwardModel::check_controls(const ControlTrajectory& controls, const char* what) const {
  check_series(controls.v1, spaces().gamma1.size(), spec_.steps, std::string(what) + ": v1");
  check_series(controls.v2, spaces().gamma2.size(), spec_.steps, std::string(what) + ": v2");
}

SparseOperator ForwardModel::velocity_operator(const Field& z_prev) const {
  const double dt = spec_.dt();
  SparseOperator k = ops().velocity_mass / dt + spec_.viscosity * (ops().a1 + ops().grad_div);
  k += assemble_b_linearized(spaces(), z_prev, FrozenSlot::first);
  return k;
}

SparseOperator ForwardModel::temperature_operator(const Field& z_new) const {
  const double dt = spec_.dt();
  SparseOperator t = ops().temperature_mass / dt + spec_.conductivity * ops().a2;
  t += assemble_c_linearized(spaces(), z_new, AdvectionSlot::velocity, AdvectionForm::skew);
  return t;
}

State ForwardModel::project_initial() const {
  const SpaceSet& s = spaces();
  State st{s.zero(SpaceKind::velocity), s.zero(SpaceKind::pressure), s.zero(SpaceKind::temperature)};
  if (spec_.initial_temperature) {
    st.temperature = interpolate_scalar(s, SpaceKind::temperature, spec_.initial_temperature);
    apply_constraints(s, st.temperature);
  }
  if (spec_.initial_velocity) {
    Field z = interpolate_velocity(s, spec_.initial_velocity);
    apply_constraints(s, z);
    const SparseOperator m = restrict_both(s.velocity, ops().velocity_mass);
    const SparseOperator d = s.velocity.restrict_cols(ops().div);
    const SaddleSolver solver(m, d, false, "initial projection");
    Eigen::VectorXd zf, p;
    solver.solve(m * s.velocity.restrict(z.coefficients), Eigen::VectorXd::Zero(d.rows()), zf, p);
    st.velocity.coefficients = s.velocity.extend(zf);
  }
  return st;
}

State ForwardModel::step(const State& current, int n, const ControlTrajectory& controls) const {
  const SpaceSet& s = spaces();
  const Operators& o = ops();
  const double dt = spec_.dt();
  const double t_new = (n + 1) * dt;
  State next{s.zero(SpaceKind::velocity), s.zero(SpaceKind::pressure), s.zero(SpaceKind::temperature)};

  Eigen::VectorXd rv = o.velocity_mass * current.velocity.coefficients / dt - buoyancy_ * current.temperature.coefficients +
                       o.h1 * controls.v1.col(n);
  if (spec_.velocity_forcing) {
    rv += assemble_velocity_load(s, [&](double x, double y) { return spec_.velocity_forcing(x, y, t_new); });
  }
  const SparseOperator k = restrict_both(s.velocity, velocity_operator(current.velocity));
  const SparseOperator d = s.velocity.restrict_cols(o.div);
  const SaddleSolver saddle(k, d, false, "velocity block");
  Eigen::VectorXd zf;
  saddle.solve(s.velocity.restrict(rv), Eigen::VectorXd::Zero(d.rows()), zf, next.pressure.coefficients);
  next.velocity.coefficients = s.velocity.extend(zf);

  Eigen::VectorXd rw = o.temperature_mass * current.temperature.coefficients / dt + o.h2 * controls.v2.col(n);
  if (spec_.temperature_forcing) {
    rw += assemble_scalar_load(s, [&](double x, double y) { return spec_.temperature_forcing(x, y, t_new); });
  }
  const SparseOperator tm = restrict_both(s.temperature, temperature_operator(next.velocity));
  next.temperature.coefficients =
      s.temperature.extend(solve_checked(tm, s.temperature.restrict(rw), "temperature block"));
  return next;
}

StateTrajectory ForwardModel::run(const ControlTrajectory& controls) const {
  check_controls(controls, "run");
  StateTrajectory traj;
  traj.dt = spec_.dt();
  traj.states.reserve(static_cast<std::size_t>(spec_.steps + 1));
  auto residual = [&](const State& st) {
    const Eigen::VectorXd r = ops().div * st.velocity.coefficients;
    return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  };
  traj.states.push_back(project_initial());
  traj.divergence_residual.push_back(residual(traj.states.back()));
  for (int n = 0; n < spec_.steps; ++n) {
    try {
      traj.states.push_back(step(traj.states.back(), n, controls));
    } catch (const SolverError& e) {
      throw SolverError("forward step " + std::to_string(n + 1) + ": " + e.what());
    }
    traj.divergence_residual.push_back(residual(traj.states.back()));
  }
  return traj;
}

double ForwardModel::evaluate_cost(const StateTrajectory& traj, const ControlTrajectory& controls) const {
  check_controls(controls, "evaluate_cost");
  if (static_cast<int>(traj.states.size()) != spec_.steps + 1) {
    throw ArgumentError("evaluate_cost: trajectory has " + std::to_string(traj.states.size()) +
                        " states, expected " + std::to_string(spec_.steps + 1));
  }
  const Operators& o = ops();
  const double dt = spec_.dt();
  double j = 0.0;
  for (int n = 1; n <= spec_.steps; ++n) {
    const State& st = traj.states[static_cast<std::size_t>(n)];
    const Eigen::VectorXd r1 = spec_.r1.col(n - 1), r2 = spec_.r2.col(n - 1);
    double term = spec_.n1 * (o.h1 * r1).dot(st.velocity.coefficients);
    if (spec_.cost_form == CostForm::flux) {
      term -= spec_.n2 / spec_.conductivity * r2.dot(o.gamma2_mass * controls.v2.col(n - 1));
    } else {
      term += spec_.n2 * (o.h2 * r2).dot(st.temperature.coefficients);
    }
    j += dt * term;
  }
  return j;
}

std::vector<EnergyRow> ForwardModel::energy_report(const StateTrajectory& traj, const ControlTrajectory& controls,
                                                   const CoercivityEstimate& constants) const {
  check_controls(controls, "energy_report");
  const SpaceSet& s = spaces();
  const Operators& o = ops();
  const double dt = spec_.dt();
  const SparseOperator vel_gram = o.velocity_mass + assemble_velocity_stiffness(s);
  const SparseOperator tem_gram = o.temperature_mass + o.a2;
  auto quad = [](const SparseOperator& m, const Eigen::VectorXd& x) { return x.dot(m * x); };

  std::vector<EnergyRow> rows;
  double vel_dissipation = 0.0, vel_buoyancy = 0.0, vel_work = 0.0;
  double tem_dissipation = 0.0, tem_work = 0.0;
  const State& first = traj.states.front();
  const double vel0 = 0.5 * quad(o.velocity_mass, first.velocity.coefficients);
  const double tem0 = 0.5 * quad(o.temperature_mass, first.temperature.coefficients);
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    const State& st = traj.states[n];
    const Eigen::VectorXd& z = st.velocity.coefficients;
    const Eigen::VectorXd& w = st.temperature.coefficients;
    if (n > 0) {
      const double t = static_cast<double>(n) * dt;
      const State& prev = traj.states[n - 1];
      const int col = static_cast<int>(n) - 1;
      vel_dissipation += dt * spec_.viscosity * constants.velocity * quad(vel_gram, z);
      vel_buoyancy += dt * z.dot(buoyancy_ * prev.temperature.coefficients);
      Eigen::VectorXd load = o.h1 * controls.v1.col(col);
      if (spec_.velocity_forcing) {
        load += assemble_velocity_load(s, [&](double x, double y) { return spec_.velocity_forcing(x, y, t); });
      }
      vel_work += dt * z.dot(load);
      tem_dissipation += dt * spec_.conductivity * constants.temperature * quad(tem_gram, w);
      Eigen::VectorXd heat = o.h2 * controls.v2.col(col);
      if (spec_.temperature_forcing) {
        heat += assemble_scalar_load(s, [&](double x, double y) { return spec_.temperature_forcing(x, y, t); });
      }
      tem_work += dt * w.dot(heat);
    }
    EnergyRow row;
    row.time = static_cast<double>(n) * dt;
    const double kin = quad(o.velocity_mass, z);
    const double th = quad(o.temperature_mass, w);
    row.kinetic = std::sqrt(kin);
    row.thermal = std::sqrt(th);
    row.velocity_lhs = 0.5 * kin + vel_dissipation + vel_buoyancy;
    row.velocity_rhs = vel0 + vel_work;
    row.temperature_lhs = 0.5 * th + tem_dissipation;
    row.temperature_rhs = tem0 + tem_work;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace flexctl
