#pragma once

// Shared problem builders for the unit and acceptance tests.

#include "flexctl/forward.hpp"
#include "manufactured.hpp"

#include <cmath>
#include <memory>
#include <random>

namespace testing_support {

using namespace flexctl;

inline std::shared_ptr<const Discretization> unit_square(int n) {
  return discretize(build_rectangle_mesh(n, n, {1.0, 1.0}));
}

/// Default channel data: r₁ and r₂ indicate [0.25, 0.75] on the right and bottom sides.
inline ProblemSpec channel_spec(const SpaceSet& s, int steps = 10, double final_time = 0.5) {
  ProblemSpec p;
  p.steps = steps;
  p.final_time = final_time;
  p.r1 = BoundarySeries::Zero(s.gamma1.size(), steps);
  p.r2 = BoundarySeries::Zero(s.gamma2.size(), steps);
  for (int i = 0; i < s.gamma1.size(); ++i) {
    const Vec2 x = s.nodes[static_cast<std::size_t>(s.gamma1.nodes[static_cast<std::size_t>(i)])];
    if (x.x() == 1.0 && x.y() >= 0.25 && x.y() <= 0.75) p.r1.row(i).setOnes();
  }
  for (int i = 0; i < s.gamma2.size(); ++i) {
    const Vec2 x = s.nodes[static_cast<std::size_t>(s.gamma2.nodes[static_cast<std::size_t>(i)])];
    if (x.y() == 0.0 && x.x() >= 0.25 && x.x() <= 0.75) p.r2.row(i).setOnes();
  }
  p.bounds = constant_bounds(s, steps, 0.5, 1.5, 0.5, 1.5);
  return p;
}

inline ControlTrajectory random_controls(const ControlBounds& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ControlTrajectory c{b.lower1, b.lower2};
  for (Eigen::Index i = 0; i < c.v1.size(); ++i) c.v1(i) = b.lower1(i) + u(rng) * (b.upper1(i) - b.lower1(i));
  for (Eigen::Index i = 0; i < c.v2.size(); ++i) c.v2(i) = b.lower2(i) + u(rng) * (b.upper2(i) - b.lower2(i));
  return c;
}

inline BoundarySeries random_series(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  BoundarySeries s(rows, cols);
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = d(rng);
  return s;
}

struct ManufacturedErrors {
  double velocity = 0.0;
  double temperature = 0.0;
  double h = 0.0;
};

/// Runs the manufactured solution on an n × n unit square with dt = 0.4 h².
inline ManufacturedErrors manufactured_run(int n, double final_time = 0.1) {
  namespace mf = manufactured;
  auto disc = unit_square(n);
  const SpaceSet& s = disc->spaces;
  const double h = 1.0 / n;
  const int steps = static_cast<int>(std::ceil(final_time / (0.4 * h * h) - 1e-9));
  ProblemSpec p;
  p.viscosity = 1.0;
  p.conductivity = 1.0;
  p.expansion = 0.1;
  p.gravity = {0.0, -1.0};
  p.final_time = final_time;
  p.steps = steps;
  const mf::Params mp{p.viscosity, p.conductivity, p.expansion, p.gravity.x(), p.gravity.y()};
  p.initial_velocity = [](double x, double y) { return Vec2(mf::z1(x, y, 0.0), mf::z2(x, y, 0.0)); };
  p.initial_temperature = [](double x, double y) { return mf::w(x, y, 0.0); };
  p.velocity_forcing = [mp](double x, double y, double t) { return Vec2(mf::f1(mp, x, y, t), mf::f2(mp, x, y, t)); };
  p.temperature_forcing = [mp](double x, double y, double t) { return mf::g(mp, x, y, t); };

  ControlTrajectory c{BoundarySeries(s.gamma1.size(), steps), BoundarySeries(s.gamma2.size(), steps)};
  const double dt = final_time / steps;
  for (int k = 0; k < steps; ++k) {
    const double t = (k + 1) * dt;
    for (int i = 0; i < s.gamma1.size(); ++i) {
      const Vec2 x = s.nodes[static_cast<std::size_t>(s.gamma1.nodes[static_cast<std::size_t>(i)])];
      c.v1(i, k) = -mf::pressure(x.x(), x.y(), t);
    }
    for (int i = 0; i < s.gamma2.size(); ++i) {
      const Vec2 x = s.nodes[static_cast<std::size_t>(s.gamma2.nodes[static_cast<std::size_t>(i)])];
      const Vec2 nrm = s.gamma2.normals[static_cast<std::size_t>(i)];
      const Vec2 grad(mf::w_dx(x.x(), x.y(), t), mf::w_dy(x.x(), x.y(), t));
      c.v2(i, k) = p.conductivity * grad.dot(nrm);
    }
  }
  const ForwardModel model(disc, p);
  const StateTrajectory traj = model.run(c);
  const State& last = traj.states.back();
  ManufacturedErrors e;
  e.h = h;
  e.velocity = velocity_l2_error(s, last.velocity, [&](double x, double y) {
    return Vec2(mf::z1(x, y, final_time), mf::z2(x, y, final_time));
  });
  e.temperature = scalar_l2_error(s, last.temperature, [&](double x, double y) { return mf::w(x, y, final_time); });
  return e;
}

}  // namespace testing_support
