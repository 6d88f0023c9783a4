#include "flexctl/run.hpp"

#include "flexctl/control_opt.hpp"
#include "flexctl/error.hpp"
#include "flexctl/forms.hpp"
#include "flexctl/output.hpp"
#include "flexctl/sensitivity.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace flexctl {

namespace {

namespace fs = std::filesystem;

// Raised for failures while writing artifacts.
struct OutputFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Field random_field(const SpaceSet& s, SpaceKind kind, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Field f = s.zero(kind);
  for (auto& c : f.coefficients) c = d(rng);
  apply_constraints(s, f);
  return f;
}

BoundarySeries random_series(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  BoundarySeries out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = d(rng);
  return out;
}

VerifyCheck at_most(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, false, value <= threshold ? CheckStatus::pass : CheckStatus::fail};
}

VerifyCheck above(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, true, value > threshold ? CheckStatus::pass : CheckStatus::fail};
}

VerifyCheck info(std::string name, double value) { return {std::move(name), value, 0.0, false, CheckStatus::info}; }

ControlTrajectory shifted(const ControlTrajectory& v, double h, const ControlTrajectory& d) {
  return {v.v1 + h * d.v1, v.v2 + h * d.v2};
}

class ArtifactWriter {
 public:
  ArtifactWriter(const RunConfig& c, const RunOptions& o)
      : dir_(o.out_dir ? *o.out_dir : c.output.directory), vtk_(c.output.vtk), csv_(c.output.csv),
        precision_(c.output.precision) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw OutputFailure("cannot create output directory " + dir_.string());
  }

  template <class F>
  void csv(const char* name, F&& write) const {
    if (csv_) guarded(name, [&] { write(dir_ / name, precision_); });
  }
  template <class F>
  void vtk(const std::string& name, F&& write) const {
    if (vtk_) guarded(name, [&] { write(dir_ / name, precision_); });
  }

 private:
  fs::path dir_;
  bool vtk_, csv_;
  int precision_;

  template <class F>
  void guarded(const std::string& name, F&& f) const {
    try {
      f();
    } catch (const std::exception& e) {
      throw OutputFailure(name + ": " + e.what());
    }
  }
};

void write_states(const ArtifactWriter& out, const SpaceSet& s, const StateTrajectory& traj) {
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    out.vtk("state_" + std::to_string(n) + ".vtk", [&](const fs::path& f, int p) {
      write_state_vtk(f, s, traj.states[n], static_cast<double>(n) * traj.dt, p);
    });
  }
}

void write_summary(const ArtifactWriter& out, const std::vector<std::pair<std::string, std::string>>& entries) {
  out.csv("summary.csv", [&](const fs::path& f, int) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [k, v] : entries) rows.push_back({k, v});
    write_csv(f, {"key", "value"}, rows);
  });
}

double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

RunResult simulate(const RunConfig& cfg, const ForwardModel& model, const ControlTrajectory& controls,
                   const ArtifactWriter& out) {
  const SpaceSet& s = model.spaces();
  spdlog::info("simulate: {} steps of {}", model.spec().steps, model.spec().dt());
  const StateTrajectory traj = model.run(controls);
  const double cost = model.evaluate_cost(traj, controls);
  const CoercivityEstimate constants = estimate_coercivity(s);
  const auto energy = model.energy_report(traj, controls, constants);
  const FluxComparison flux = compare_boundary_flux(model, traj, controls);
  spdlog::info("simulate: J = {}", cost);
  const int p = cfg.output.precision;

  write_states(out, s, traj);
  out.csv("controls.csv", [&](const fs::path& f, int q) { write_controls_csv(f, s, controls, model.spec().dt(), q); });
  out.csv("energy_report.csv", [&](const fs::path& f, int q) { write_energy_csv(f, energy, q); });
  out.csv("cost_history.csv", [&](const fs::path& f, int q) { write_history_csv(f, "cost", {cost}, q); });
  double worst_margin = 0.0;
  for (const EnergyRow& r : energy) {
    const double v = r.velocity_margin() / (std::abs(r.velocity_lhs) + std::abs(r.velocity_rhs) + 1.0);
    const double t = r.temperature_margin() / (std::abs(r.temperature_lhs) + std::abs(r.temperature_rhs) + 1.0);
    worst_margin = std::min({worst_margin, v, t});
  }
  write_summary(out, {{"mode", "simulate"},
                      {"cost", format_real(cost, p)},
                      {"max_divergence_residual", format_real(max_of(traj.divergence_residual), p)},
                      {"min_relative_energy_margin", format_real(worst_margin, p)},
                      {"flux_recovered", format_real(flux.recovered, p)},
                      {"flux_substituted", format_real(flux.substituted, p)}});
  return {};
}

RunResult optimize_run(const RunConfig& cfg, const ForwardModel& model, const ControlTrajectory& start,
                       const ArtifactWriter& out, std::uint64_t seed) {
  const SpaceSet& s = model.spaces();
  const ProblemSpec& spec = model.spec();
  spdlog::info("optimize: {} on {} steps", to_string(cfg.optimizer.method), spec.steps);
  const OptimizationResult res = optimize(model, start, cfg.optimizer);
  spdlog::info("optimize: {} after {} iterations, J = {}", to_string(res.reason), res.iterations,
               res.cost_history.back());

  // Fields at the returned control.
  const AdjointTrajectory adj_cost = run_adjoint(model, res.state, AdjointSource::cost);
  const AdjointTrajectory adj_trace = run_adjoint(model, res.state, AdjointSource::trace);
  const ControlGradient grad = discrete_gradient(model, res.state, adj_cost);
  const SwitchingFields descent = descent_fields(grad);
  const SwitchingFields adjoint_fields = switching_fields(model, adj_trace);
  const double cost = res.cost_history.back();
  const double gap = fw_gap(res.control, descent, spec.bounds);
  const double vi = vi_residual(res.control, descent, spec.bounds, 100, seed);
  const double vi_scale = pairing_scale(descent, spec.bounds);
  const int violations = count_bang_bang_violations(res.control, descent, spec.bounds);
  const double trace_vi = vi_residual(res.control, adjoint_fields, spec.bounds, 100, seed);
  const int p = cfg.output.precision;

  write_states(out, s, res.state);
  for (std::size_t n = 0; n < adj_trace.velocity.size(); ++n) {
    out.vtk("adjoint_" + std::to_string(n) + ".vtk", [&](const fs::path& f, int q) {
      write_adjoint_vtk(f, s, adj_trace.velocity[n], adj_trace.temperature[n], static_cast<double>(n) * spec.dt(), q);
    });
  }
  out.csv("controls.csv", [&](const fs::path& f, int q) { write_controls_csv(f, s, res.control, spec.dt(), q); });
  out.csv("cost_history.csv", [&](const fs::path& f, int q) { write_history_csv(f, "cost", res.cost_history, q); });
  out.csv("gap_history.csv", [&](const fs::path& f, int q) { write_history_csv(f, "gap", res.gap_history, q); });
  out.csv("switching.csv",
          [&](const fs::path& f, int q) { write_switching_csv(f, s, adjoint_fields, descent, spec.dt(), q); });
  write_summary(out, {{"mode", "optimize"},
                      {"method", to_string(cfg.optimizer.method)},
                      {"termination", to_string(res.reason)},
                      {"iterations", std::to_string(res.iterations)},
                      {"cost", format_real(cost, p)},
                      {"gap", format_real(gap, p)},
                      {"gap_threshold", format_real(cfg.optimizer.gap_tol * (1.0 + std::abs(cost)), p)},
                      {"vi_residual", format_real(vi, p)},
                      {"vi_scale", format_real(vi_scale, p)},
                      {"bang_bang_violations", std::to_string(violations)},
                      {"vi_residual_adjoint_trace", format_real(trace_vi, p)}});
  return {};
}

RunResult verify_run(const RunConfig&, const ForwardModel& model, const ControlTrajectory& controls,
                     const ArtifactWriter& out, std::uint64_t seed) {
  spdlog::info("verify: running the invariant suite");
  RunResult r;
  r.checks = verify_suite(model, controls, seed);
  int failed = 0;
  for (const VerifyCheck& c : r.checks) {
    spdlog::info("verify: {:<28} {:>12.4e}  {}", c.name, c.value, to_string(c.status));
    if (c.status == CheckStatus::fail) ++failed;
  }
  out.csv("verify_report.csv", [&](const fs::path& f, int q) {
    std::vector<std::vector<std::string>> rows;
    for (const VerifyCheck& c : r.checks) {
      rows.push_back({c.name, format_real(c.value, q),
                      c.status == CheckStatus::info ? "" : (c.positive ? ">" : "<=") + format_real(c.threshold, 6),
                      to_string(c.status)});
    }
    write_csv(f, {"check", "value", "threshold", "status"}, rows);
  });
  if (failed > 0) {
    r.exit_code = 4;
    r.stage = "verify";
    r.message = std::to_string(failed) + " check(s) failed";
  }
  return r;
}

}  // namespace

std::optional<RunMode> parse_mode(std::string_view name) {
  if (name == "simulate") return RunMode::simulate;
  if (name == "optimize") return RunMode::optimize;
  if (name == "verify") return RunMode::verify;
  return std::nullopt;
}

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::info: return "info";
  }
  return "?";
}

FluxComparison compare_boundary_flux(const ForwardModel& model, const StateTrajectory& traj,
                                     const ControlTrajectory& controls) {
  const SpaceSet& s = model.spaces();
  const Operators& o = model.ops();
  const ProblemSpec& p = model.spec();
  const double dt = p.dt();
  FluxComparison out;
  for (int n = 1; n <= p.steps; ++n) {
    const auto un = static_cast<std::size_t>(n);
    const State& cur = traj.states[un];
    Eigen::VectorXd residual = model.temperature_operator(cur.velocity) * cur.temperature.coefficients -
                               o.temperature_mass * traj.states[un - 1].temperature.coefficients / dt;
    if (p.temperature_forcing) {
      residual -= assemble_scalar_load(s, [&](double x, double y) { return p.temperature_forcing(x, y, n * dt); });
    }
    double tested = 0.0;
    for (int i = 0; i < s.gamma2.size(); ++i) tested += p.r2(i, n - 1) * residual(s.gamma2.nodes[static_cast<std::size_t>(i)]);
    out.recovered += dt * tested / p.conductivity;
    out.substituted -= dt / p.conductivity * p.r2.col(n - 1).dot(o.gamma2_mass * controls.v2.col(n - 1));
  }
  return out;
}

std::vector<VerifyCheck> verify_suite(const ForwardModel& model, const ControlTrajectory& controls,
                                      std::uint64_t seed) {
  const SpaceSet& s = model.spaces();
  const ProblemSpec& spec = model.spec();
  std::mt19937_64 rng(seed);
  std::vector<VerifyCheck> checks;

  double b_vv = 0.0, b_anti = 0.0, c_ww = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Field u = random_field(s, SpaceKind::velocity, rng);
    const Field v = random_field(s, SpaceKind::velocity, rng);
    const Field w = random_field(s, SpaceKind::velocity, rng);
    const double nu = u.coefficients.norm(), nv = v.coefficients.norm(), nw = w.coefficients.norm();
    b_vv = std::max(b_vv, std::abs(apply_b(s, u, v, v)) / (nu * nv * nv));
    b_anti = std::max(b_anti, std::abs(apply_b(s, u, v, w) + apply_b(s, u, w, v)) / (nu * nv * nw));
    const Field a = random_field(s, SpaceKind::temperature, rng);
    c_ww = std::max(c_ww, std::abs(apply_c(s, u, a, a, AdvectionForm::skew)) /
                              (nu * a.coefficients.norm() * a.coefficients.norm()));
  }
  checks.push_back(at_most("form_b_uvv", b_vv, 1e-12));
  checks.push_back(at_most("form_b_antisymmetry", b_anti, 1e-12));
  checks.push_back(at_most("form_c_skew_www", c_ww, 1e-12));

  const CoercivityEstimate constants = estimate_coercivity(s);
  checks.push_back(above("coercivity_velocity", constants.velocity, 0.0));
  checks.push_back(above("coercivity_temperature", constants.temperature, 0.0));

  const StateTrajectory base = model.run(controls);
  double worst = 0.0;
  for (const EnergyRow& r : model.energy_report(base, controls, constants)) {
    worst = std::max(worst, -r.velocity_margin() / (std::abs(r.velocity_lhs) + std::abs(r.velocity_rhs) + 1.0));
    worst = std::max(worst,
                     -r.temperature_margin() / (std::abs(r.temperature_lhs) + std::abs(r.temperature_rhs) + 1.0));
  }
  checks.push_back(at_most("energy_margin_deficit", worst, 1e-10));
  checks.push_back(at_most("divergence_residual", max_of(base.divergence_residual), 1e-10));

  if (spec.steps > 0) {
    const AdjointTrajectory adj = run_adjoint(model, base, AdjointSource::trace);
    double pairing = 0.0;
    for (int k = 0; k < 3; ++k) {
      const ControlTrajectory d{random_series(s.gamma1.size(), spec.steps, rng),
                                random_series(s.gamma2.size(), spec.steps, rng)};
      const double lhs = tangent_pairing(model, run_linearized(model, base, d));
      const double rhs = adjoint_pairing(model, adj, d);
      pairing = std::max(pairing, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300));
    }
    checks.push_back(at_most("adjoint_pairing", pairing, 1e-10));

    const ControlGradient g = discrete_gradient(model, base, run_adjoint(model, base, AdjointSource::cost));
    double gradient_error = 0.0;
    for (int k = 0; k < 2; ++k) {
      const ControlTrajectory d{random_series(s.gamma1.size(), spec.steps, rng),
                                random_series(s.gamma2.size(), spec.steps, rng)};
      const double exact = (g.d1.array() * d.v1.array()).sum() + (g.d2.array() * d.v2.array()).sum();
      double best = std::numeric_limits<double>::infinity();
      for (double h : {1e-3, 1e-4, 1e-5, 1e-6}) {
        const ControlTrajectory up = shifted(controls, h, d), down = shifted(controls, -h, d);
        const double fd =
            (model.evaluate_cost(model.run(up), up) - model.evaluate_cost(model.run(down), down)) / (2 * h);
        best = std::min(best, std::abs(fd - exact) / std::max(std::abs(exact), 1e-300));
      }
      gradient_error = std::max(gradient_error, best);
    }
    checks.push_back(at_most("gradient_fd_check", gradient_error, 1e-6));
  }

  const SmallnessDiagnostic small = smallness_condition(spec, constants);
  checks.push_back(info("smallness_ratio", small.ratio));
  checks.push_back(info("coercivity_velocity_value", constants.velocity));
  checks.push_back(info("coercivity_temperature_value", constants.temperature));
  const FluxComparison flux = compare_boundary_flux(model, base, controls);
  checks.push_back(info("flux_recovered", flux.recovered));
  checks.push_back(info("flux_substituted", flux.substituted));
  return checks;
}

RunResult run_command(const RunConfig& config, RunMode mode, const RunOptions& options) {
  std::string stage = "setup";
  auto failure = [&](int code, const std::string& message) {
    spdlog::error("{}: {}", stage, message);
    RunResult r;
    r.exit_code = code;
    r.stage = stage;
    r.message = message;
    return r;
  };
  try {
    stage = "mesh";
    auto disc = discretize(build_mesh(config));
    stage = "config";
    const ProblemSpec spec = build_problem(config, disc->spaces);
    const ForwardModel model(disc, spec);
    const ControlTrajectory controls = build_initial_controls(config, disc->spaces);
    stage = "output";
    const ArtifactWriter out(config, options);
    switch (mode) {
      case RunMode::simulate: stage = "simulate"; return simulate(config, model, controls, out);
      case RunMode::optimize: stage = "optimize"; return optimize_run(config, model, controls, out, options.seed);
      case RunMode::verify: stage = "verify"; return verify_run(config, model, controls, out, options.seed);
    }
    return failure(2, "unknown mode");
  } catch (const ConfigError& e) {
    return failure(2, e.what());
  } catch (const ArgumentError& e) {
    return failure(2, e.what());
  } catch (const SolverError& e) {
    return failure(3, e.what());
  } catch (const OutputFailure& e) {
    stage = "output";
    return failure(2, e.what());
  }
}

}  // namespace flexctl
