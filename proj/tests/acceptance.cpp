// Acceptance run: one line per criterion, nonzero exit if any fails.

#include "flexctl/config.hpp"
#include "flexctl/control_opt.hpp"
#include "flexctl/forms.hpp"
#include "flexctl/sensitivity.hpp"
#include "support.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

using namespace flexctl;
using namespace testing_support;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (sec > budget_s) {
    o.pass = false;
    o.detail += " [over time budget " + std::to_string(static_cast<int>(budget_s)) + " s]";
  }
  if (!o.pass) ++failures;
  std::printf("criterion %2d %-28s %s  %s  (%.2f s)\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), sec);
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Field random_field(const SpaceSet& s, SpaceKind kind, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Field f = s.zero(kind);
  for (auto& c : f.coefficients) c = d(rng);
  apply_constraints(s, f);
  return f;
}

Vec2 swirl(double x, double y) {
  return Vec2(std::sin(2 * M_PI * y) * std::cos(M_PI * x), std::sin(M_PI * x) * std::pow(std::sin(M_PI * y), 2));
}

// Channel data with a moving start, stronger buoyancy and random weights.
ProblemSpec lively_spec(const SpaceSet& s, int steps, std::mt19937_64& rng) {
  ProblemSpec p = channel_spec(s, steps, 0.5);
  p.expansion = 0.5;
  p.initial_velocity = [](double x, double y) -> Vec2 { return 2.0 * swirl(x, y); };
  p.initial_temperature = [](double x, double y) { return std::sin(M_PI * x) * (1 + y); };
  p.r1 = random_series(s.gamma1.size(), steps, rng);
  p.r2 = random_series(s.gamma2.size(), steps, rng);
  return p;
}

ControlTrajectory axpy(const ControlTrajectory& v, double h, const ControlTrajectory& d) {
  return {v.v1 + h * d.v1, v.v2 + h * d.v2};
}

bool near(double value, double pinned, double rel) { return std::abs(value - pinned) <= rel * std::abs(pinned); }

// Regression pins, (velocity, temperature) per mesh size.
struct CoercivityPin {
  int n;
  double velocity, temperature;
};
constexpr CoercivityPin kCoercivityPins[] = {
    {4, 0.908040850697, 0.908040850694},
    {8, 0.908002994601, 0.908002994597},
    {16, 0.908000501464, 0.908000501410},
};
constexpr double kSmallnessPin = 0.533676543499;
constexpr double kPinTolerance = 1e-7;

Outcome form_identities() {
  auto disc = unit_square(8);
  const SpaceSet& s = disc->spaces;
  std::mt19937_64 rng(101);
  double b_vv = 0.0, b_anti = 0.0, c_ww = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Field u = random_field(s, SpaceKind::velocity, rng);
    const Field v = random_field(s, SpaceKind::velocity, rng);
    const Field w = random_field(s, SpaceKind::velocity, rng);
    const Field a = random_field(s, SpaceKind::temperature, rng);
    const double nu = u.coefficients.norm(), nv = v.coefficients.norm(), nw = w.coefficients.norm();
    const double na = a.coefficients.norm();
    b_vv = std::max(b_vv, std::abs(apply_b(s, u, v, v)) / (nu * nv * nv));
    b_anti = std::max(b_anti, std::abs(apply_b(s, u, v, w) + apply_b(s, u, w, v)) / (nu * nv * nw));
    c_ww = std::max(c_ww, std::abs(apply_c(s, u, a, a, AdvectionForm::skew)) / (nu * na * na));
  }
  return {b_vv <= 1e-12 && b_anti <= 1e-12 && c_ww <= 1e-12,
          "b(u,v,v) " + fmt(b_vv) + ", b(u,v,w)+b(u,w,v) " + fmt(b_anti) + ", c(z,w,w) " + fmt(c_ww) +
              " (relative, limit 1e-12)"};
}

Outcome coercivity() {
  bool ok = true;
  std::string detail;
  for (const CoercivityPin& pin : kCoercivityPins) {
    const Mesh mesh = build_rectangle_mesh(pin.n, pin.n, {1.0, 1.0});
    const SpaceSet s = build_spaces(mesh);
    const CoercivityEstimate c = estimate_coercivity(s);
    ok = ok && c.velocity > 0.0 && c.temperature > 0.0 && near(c.velocity, pin.velocity, kPinTolerance) &&
         near(c.temperature, pin.temperature, kPinTolerance);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s%dx%d c1=%.9f c1'=%.9f", detail.empty() ? "" : ", ", pin.n, pin.n, c.velocity,
                  c.temperature);
    detail += buf;
  }
  return {ok, detail};
}

Outcome energy() {
  auto disc = unit_square(8);
  const SpaceSet& s = disc->spaces;
  const CoercivityEstimate constants = estimate_coercivity(s);
  bool ok = true;
  std::string detail;
  for (double dt : {0.1, 0.01}) {
    ProblemSpec p = channel_spec(s, static_cast<int>(std::lround(0.5 / dt)), 0.5);
    p.expansion = 0.0;
    p.initial_velocity = [](double x, double y) -> Vec2 { return 2.0 * swirl(x, y); };
    p.initial_temperature = [](double x, double y) { return std::sin(M_PI * x) * (1 + y); };
    const ForwardModel model(disc, p);
    const ControlTrajectory zero = constant_controls(s, p.steps, 0.0, 0.0);
    const auto rows = model.energy_report(model.run(zero), zero, constants);
    double worst_rise = 0.0;
    for (std::size_t n = 1; n < rows.size(); ++n) worst_rise = std::max(worst_rise, rows[n].kinetic - rows[n - 1].kinetic);
    const bool mono = worst_rise <= 0.0 && rows.front().kinetic > 0.0;
    ok = ok && mono;
    detail += "dt " + fmt(dt) + ": |z| " + fmt(rows.front().kinetic) + " -> " + fmt(rows.back().kinetic) +
              " max rise " + fmt(worst_rise) + "; ";
  }
  std::mt19937_64 rng(103);
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    ProblemSpec p = lively_spec(s, 10, rng);
    const ForwardModel model(disc, p);
    const ControlTrajectory v = random_controls(p.bounds, rng);
    for (const EnergyRow& r : model.energy_report(model.run(v), v, constants)) {
      worst = std::max(worst, -r.velocity_margin() / (std::abs(r.velocity_lhs) + std::abs(r.velocity_rhs) + 1.0));
      worst = std::max(worst,
                       -r.temperature_margin() / (std::abs(r.temperature_lhs) + std::abs(r.temperature_rhs) + 1.0));
    }
  }
  ok = ok && worst <= 1e-10;
  detail += "buoyant margin deficit " + fmt(worst) + " (limit 1e-10)";
  return {ok, detail};
}

double remainder(const StateTrajectory& moved, const StateTrajectory& base, const LinearizedTrajectory& lin, double h) {
  double s = 0.0;
  for (std::size_t n = 0; n < base.states.size(); ++n) {
    s += (moved.states[n].velocity.coefficients - base.states[n].velocity.coefficients -
          h * lin.velocity[n].coefficients)
             .squaredNorm() +
         (moved.states[n].temperature.coefficients - base.states[n].temperature.coefficients -
          h * lin.temperature[n].coefficients)
             .squaredNorm();
  }
  return std::sqrt(s);
}

Outcome taylor() {
  auto disc = unit_square(8);
  const SpaceSet& s = disc->spaces;
  std::mt19937_64 rng(107);
  const ProblemSpec p = lively_spec(s, 10, rng);
  const ForwardModel model(disc, p);
  const ControlTrajectory v = random_controls(p.bounds, rng);
  const ControlTrajectory d{random_series(s.gamma1.size(), 10, rng), random_series(s.gamma2.size(), 10, rng)};
  const StateTrajectory base = model.run(v);
  const LinearizedTrajectory lin = run_linearized(model, base, d);
  bool ok = true;
  std::string detail = "orders";
  double prev = 0.0;
  for (double h : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double r = remainder(model.run(axpy(v, h, d)), base, lin, h);
    if (prev > 0.0) {
      const double order = std::log10(prev / r);
      ok = ok && std::abs(order - 2.0) <= 0.2;
      detail += " " + fmt(order);
    }
    prev = r;
  }
  return {ok, detail + " (want 2.0 +- 0.2)"};
}

Outcome pairing() {
  auto disc = unit_square(8);
  const SpaceSet& s = disc->spaces;
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    ProblemSpec p = lively_spec(s, 10, rng);
    p.viscosity = 0.5 + 1.5 * u(rng);
    p.conductivity = 0.5 + 1.5 * u(rng);
    p.expansion = u(rng);
    const double angle = 2 * M_PI * u(rng);
    p.gravity = {std::cos(angle), std::sin(angle)};
    p.n1 = 2.0 * u(rng);
    p.n2 = 2.0 * u(rng);
    p.cost_form = k % 2 == 0 ? CostForm::flux : CostForm::trace;
    const ForwardModel model(disc, p);
    const StateTrajectory base = model.run(random_controls(p.bounds, rng));
    const AdjointTrajectory adj = run_adjoint(model, base, AdjointSource::trace);
    const ControlTrajectory d{random_series(s.gamma1.size(), 10, rng), random_series(s.gamma2.size(), 10, rng)};
    const double lhs = tangent_pairing(model, run_linearized(model, base, d, 0.0));
    const double rhs = adjoint_pairing(model, adj, d);
    worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
  }
  return {worst <= 1e-10, "max relative mismatch " + fmt(worst) + " (limit 1e-10)"};
}

Outcome gradient() {
  auto disc = unit_square(8);
  const SpaceSet& s = disc->spaces;
  std::mt19937_64 rng(113);
  const ProblemSpec p = lively_spec(s, 10, rng);
  const ForwardModel model(disc, p);
  // Interior base point so that v ± hδ stays in the box.
  ControlTrajectory v = random_controls(p.bounds, rng);
  v.v1 = 0.5 * (v.v1.array() + 1.0);
  v.v2 = 0.5 * (v.v2.array() + 1.0);
  const StateTrajectory base = model.run(v);
  const ControlGradient g = discrete_gradient(model, base, run_adjoint(model, base));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-4;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    ControlTrajectory d{BoundarySeries(v.v1.rows(), v.v1.cols()), BoundarySeries(v.v2.rows(), v.v2.cols())};
    for (Eigen::Index i = 0; i < d.v1.size(); ++i) d.v1(i) = u(rng);
    for (Eigen::Index i = 0; i < d.v2.size(); ++i) d.v2(i) = u(rng);
    const ControlTrajectory plus = axpy(v, h, d), minus = axpy(v, -h, d);
    const double fd = (model.evaluate_cost(model.run(plus), plus) - model.evaluate_cost(model.run(minus), minus)) / (2 * h);
    const double exact = (g.d1.array() * d.v1.array()).sum() + (g.d2.array() * d.v2.array()).sum();
    worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
  }
  return {worst <= 1e-6, "max relative error " + fmt(worst) + " at h = 1e-4 (limit 1e-6)"};
}

struct DefaultOptimum {
  std::unique_ptr<ForwardModel> model;
  OptimizationResult result;
  SwitchingFields descent;
};

DefaultOptimum& default_optimum() {
  static DefaultOptimum d = [] {
    const RunConfig cfg;
    auto disc = discretize(build_mesh(cfg));
    DefaultOptimum out;
    out.model = std::make_unique<ForwardModel>(disc, build_problem(cfg, disc->spaces));
    OptimizationOptions opts = cfg.optimizer;
    opts.method = OptimizationMethod::conditional_gradient;
    out.result = optimize(*out.model, build_initial_controls(cfg, disc->spaces), opts);
    const ControlGradient g = discrete_gradient(*out.model, out.result.state, run_adjoint(*out.model, out.result.state));
    out.descent = descent_fields(g);
    return out;
  }();
  return d;
}

Outcome optimizer_fixed_point() {
  DefaultOptimum& d = default_optimum();
  const ControlBounds& b = d.model->spec().bounds;
  const double cost = d.result.cost_history.back();
  const double gap = fw_gap(d.result.control, d.descent, b);
  const double limit = 1e-6 * (1.0 + std::abs(cost));
  const int violations = count_bang_bang_violations(d.result.control, d.descent, b, 1e-6, 1e-6);
  const bool ok = gap <= limit && d.result.iterations <= 50 && violations == 0;
  return {ok, to_string(d.result.reason) + " after " + std::to_string(d.result.iterations) + " iterations, J " +
                  fmt(cost) + ", gap " + fmt(gap) + " (limit " + fmt(limit) + "), violations " +
                  std::to_string(violations)};
}

Outcome variational_inequality() {
  DefaultOptimum& d = default_optimum();
  const ControlBounds& b = d.model->spec().bounds;
  const double residual = vi_residual(d.result.control, d.descent, b, 100, 127);
  const double scale = pairing_scale(d.descent, b);
  return {residual <= 1e-8 * scale, "residual " + fmt(residual) + ", limit 1e-8 * " + fmt(scale)};
}

Outcome spatial_accuracy() {
  bool ok = true;
  std::string detail;
  ManufacturedErrors prev;
  for (int n : {4, 8, 16}) {
    const ManufacturedErrors e = manufactured_run(n);
    if (n > 4) {
      const double ov = std::log2(prev.velocity / e.velocity);
      const double ot = std::log2(prev.temperature / e.temperature);
      ok = ok && ov >= 1.8 && ot >= 1.8;
      detail += std::to_string(n / 2) + "->" + std::to_string(n) + ": velocity " + fmt(ov) + ", temperature " +
                fmt(ot) + "; ";
    }
    prev = e;
  }
  return {ok, detail + "want >= 1.8"};
}

Outcome smallness() {
  const RunConfig cfg;
  auto disc = discretize(build_mesh(cfg));
  const SmallnessDiagnostic d =
      smallness_condition(build_problem(cfg, disc->spaces), estimate_coercivity(disc->spaces));
  char buf[128];
  std::snprintf(buf, sizeof buf, "ratio %.12f (pinned %.12f)", d.ratio, kSmallnessPin);
  return {d.ratio <= 1.0 && near(d.ratio, kSmallnessPin, kPinTolerance), buf};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  criterion(1, "form identities", 10, form_identities);
  criterion(2, "coercivity", 30, coercivity);
  criterion(3, "energy stability", 60, energy);
  criterion(4, "linearization consistency", 60, taylor);
  criterion(5, "adjoint pairing identity", 60, pairing);
  criterion(6, "gradient check", 120, gradient);
  criterion(7, "optimizer fixed point", 300, optimizer_fixed_point);
  criterion(8, "variational inequality", 60, variational_inequality);
  criterion(9, "spatial accuracy", 300, spatial_accuracy);
  criterion(10, "smallness diagnostic", 10, smallness);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
