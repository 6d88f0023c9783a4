#include "flexctl/control_opt.hpp"

#include "flexctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace flexctl {

namespace {

bool same_shape(const BoundarySeries& a, const BoundarySeries& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

void check_grid(const SwitchingFields& s, const ControlBounds& b, const char* what) {
  if (!same_shape(s.sigma1, b.lower1) || !same_shape(s.sigma2, b.lower2) || !same_shape(s.weight1, s.sigma1) ||
      !same_shape(s.weight2, s.sigma2)) {
    throw ArgumentError(std::string(what) + ": switching fields and bounds are on different grids");
  }
}

void check_control_grid(const ControlTrajectory& v, const ControlBounds& b, const char* what) {
  if (!same_shape(v.v1, b.lower1) || !same_shape(v.v2, b.lower2)) {
    throw ArgumentError(std::string(what) + ": controls and bounds are on different grids");
  }
}

BoundarySeries vertex(const BoundarySeries& sigma, const BoundarySeries& lower, const BoundarySeries& upper) {
  return (sigma.array() > 0.0).select(upper, lower);
}

double max_abs(const SwitchingFields& s) {
  double m = 0.0;
  if (s.sigma1.size() > 0) m = std::max(m, s.sigma1.cwiseAbs().maxCoeff());
  if (s.sigma2.size() > 0) m = std::max(m, s.sigma2.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

void check_bounds(const ControlBounds& b, const char* what) {
  if (!same_shape(b.lower1, b.upper1) || !same_shape(b.lower2, b.upper2)) {
    throw ArgumentError(std::string(what) + ": lower and upper bounds differ in shape");
  }
  if ((b.lower1.array() <= 0.0).any() || (b.lower2.array() <= 0.0).any()) {
    throw ArgumentError(std::string(what) + ": lower bounds must be > 0");
  }
  if ((b.upper1.array() < b.lower1.array()).any() || (b.upper2.array() < b.lower2.array()).any()) {
    throw ArgumentError(std::string(what) + ": upper bound below lower bound");
  }
}

ControlTrajectory project_admissible(const ControlTrajectory& v, const ControlBounds& bounds) {
  check_bounds(bounds, "project_admissible");
  check_control_grid(v, bounds, "project_admissible");
  return {v.v1.cwiseMax(bounds.lower1).cwiseMin(bounds.upper1), v.v2.cwiseMax(bounds.lower2).cwiseMin(bounds.upper2)};
}

ControlTrajectory bang_bang(const SwitchingFields& sigma, const ControlBounds& bounds) {
  check_grid(sigma, bounds, "bang_bang");
  return {vertex(sigma.sigma1, bounds.lower1, bounds.upper1), vertex(sigma.sigma2, bounds.lower2, bounds.upper2)};
}

double weighted_pairing(const SwitchingFields& sigma, const ControlTrajectory& a, const ControlTrajectory& b) {
  if (!same_shape(a.v1, sigma.sigma1) || !same_shape(b.v1, sigma.sigma1) || !same_shape(a.v2, sigma.sigma2) ||
      !same_shape(b.v2, sigma.sigma2)) {
    throw ArgumentError("weighted_pairing: controls and switching fields are on different grids");
  }
  return (sigma.weight1.array() * sigma.sigma1.array() * (a.v1 - b.v1).array()).sum() +
         (sigma.weight2.array() * sigma.sigma2.array() * (a.v2 - b.v2).array()).sum();
}

double fw_gap(const ControlTrajectory& v, const SwitchingFields& sigma, const ControlBounds& bounds) {
  return weighted_pairing(sigma, bang_bang(sigma, bounds), v);
}

double vi_residual(const ControlTrajectory& v, const SwitchingFields& sigma, const ControlBounds& bounds, int samples,
                   std::uint64_t seed) {
  double worst = fw_gap(v, sigma, bounds);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](const BoundarySeries& lo, const BoundarySeries& hi) {
    BoundarySeries out(lo.rows(), lo.cols());
    for (Eigen::Index j = 0; j < lo.cols(); ++j) {
      for (Eigen::Index i = 0; i < lo.rows(); ++i) out(i, j) = lo(i, j) + unit(rng) * (hi(i, j) - lo(i, j));
    }
    return out;
  };
  for (int k = 0; k < samples; ++k) {
    const ControlTrajectory trial{draw(bounds.lower1, bounds.upper1), draw(bounds.lower2, bounds.upper2)};
    worst = std::max(worst, weighted_pairing(sigma, trial, v));
  }
  return worst;
}

double pairing_scale(const SwitchingFields& sigma, const ControlBounds& bounds) {
  check_grid(sigma, bounds, "pairing_scale");
  return (sigma.weight1.array() * sigma.sigma1.array().abs() * (bounds.upper1 - bounds.lower1).array()).sum() +
         (sigma.weight2.array() * sigma.sigma2.array().abs() * (bounds.upper2 - bounds.lower2).array()).sum();
}

int count_bang_bang_violations(const ControlTrajectory& v, const SwitchingFields& sigma, const ControlBounds& bounds,
                               double sigma_tol, double deviation_tol) {
  const ControlTrajectory bb = bang_bang(sigma, bounds);
  check_control_grid(v, bounds, "count_bang_bang_violations");
  const double threshold = sigma_tol * max_abs(sigma);
  int count = 0;
  auto scan = [&](const BoundarySeries& s, const BoundarySeries& x, const BoundarySeries& target,
                  const BoundarySeries& lo, const BoundarySeries& hi) {
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      for (Eigen::Index i = 0; i < s.rows(); ++i) {
        if (std::abs(s(i, j)) > threshold && std::abs(x(i, j) - target(i, j)) > deviation_tol * (hi(i, j) - lo(i, j))) {
          ++count;
        }
      }
    }
  };
  scan(sigma.sigma1, v.v1, bb.v1, bounds.lower1, bounds.upper1);
  scan(sigma.sigma2, v.v2, bb.v2, bounds.lower2, bounds.upper2);
  return count;
}

std::string to_string(OptimizationMethod m) {
  return m == OptimizationMethod::conditional_gradient ? "conditional-gradient" : "projected-gradient";
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::gap_tol: return "gap-tol";
    case Termination::max_iter: return "max-iter";
    case Termination::stalled_line_search: return "stalled-line-search";
  }
  return "unknown";
}

OptimizationResult optimize(const ForwardModel& model, const ControlTrajectory& initial,
                            const OptimizationOptions& options) {
  const ControlBounds& bounds = model.spec().bounds;
  if (bounds.lower1.size() == 0 && bounds.lower2.size() == 0) {
    throw ArgumentError("optimize: the problem has no control bounds");
  }
  check_bounds(bounds, "optimize");
  model.check_controls(initial, "optimize");
  if (options.max_iter < 0 || options.max_halvings < 0 || !(options.gap_tol >= 0.0)) {
    throw ArgumentError("optimize: max_iter, max_halvings and gap_tol must be >= 0");
  }

  OptimizationResult res;
  res.control = project_admissible(initial, bounds);
  double cost = 0.0;
  try {
    res.state = model.run(res.control);
    cost = model.evaluate_cost(res.state, res.control);
  } catch (const SolverError& e) {
    throw SolverError("optimize iterate 0: " + std::string(e.what()));
  }
  res.cost_history.push_back(cost);

  double pg_step = 0.0;
  for (int it = 1;; ++it) {
    if (it > options.max_iter) {
      res.reason = Termination::max_iter;
      break;
    }
    res.iterations = it;
    try {
      res.gradient = discrete_gradient(model, res.state, run_adjoint(model, res.state));
    } catch (const SolverError& e) {
      throw SolverError("optimize iterate " + std::to_string(it) + ": " + e.what());
    }
    const SwitchingFields descent = descent_fields(res.gradient);
    const double gap = fw_gap(res.control, descent, bounds);
    res.gap_history.push_back(gap);
    if (gap <= options.gap_tol * (1.0 + std::abs(cost))) {
      res.reason = Termination::gap_tol;
      break;
    }

    ControlTrajectory direction;
    double step = 1.0;
    if (options.method == OptimizationMethod::conditional_gradient) {
      const ControlTrajectory target = bang_bang(descent, bounds);
      direction = {target.v1 - res.control.v1, target.v2 - res.control.v2};
    } else {
      const double range = std::max((bounds.upper1 - bounds.lower1).maxCoeff(), (bounds.upper2 - bounds.lower2).maxCoeff());
      const double slope = std::max(res.gradient.d1.cwiseAbs().maxCoeff(), res.gradient.d2.cwiseAbs().maxCoeff());
      // Grow from the last accepted step so weakly driven nodes still reach their bound.
      step = std::max(range / slope, 2.0 * pg_step);
    }
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, step *= 0.5) {
      ControlTrajectory trial;
      if (options.method == OptimizationMethod::conditional_gradient) {
        trial = {res.control.v1 + step * direction.v1, res.control.v2 + step * direction.v2};
        trial = project_admissible(trial, bounds);  // removes roundoff past the box
      } else {
        trial = project_admissible(
            {res.control.v1 - step * res.gradient.d1, res.control.v2 - step * res.gradient.d2}, bounds);
      }
      const double predicted = (res.gradient.d1.array() * (trial.v1 - res.control.v1).array()).sum() +
                               (res.gradient.d2.array() * (trial.v2 - res.control.v2).array()).sum();
      if (!(predicted < 0.0)) continue;
      StateTrajectory traj;
      double trial_cost = 0.0;
      try {
        traj = model.run(trial);
        trial_cost = model.evaluate_cost(traj, trial);
      } catch (const SolverError& e) {
        throw SolverError("optimize iterate " + std::to_string(it) + ": " + e.what());
      }
      if (trial_cost <= cost + options.armijo * predicted) {
        res.control = std::move(trial);
        res.state = std::move(traj);
        cost = trial_cost;
        res.cost_history.push_back(cost);
        pg_step = step;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.reason = Termination::stalled_line_search;
      break;
    }
  }
  return res;
}

}  // namespace flexctl
