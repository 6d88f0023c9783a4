#include "flexctl/config.hpp"

#include "flexctl/error.hpp"
#include "flexctl/output.hpp"
#include "flexctl/toml_reader.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace flexctl {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

std::string join(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

void only_keys(const json& table, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!table.is_object()) bad(path, "expected a table");
  for (const auto& [key, value] : table.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError("unknown key '" + join(path, key) + "'");
  }
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) bad(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(path, "must be finite");
  return d;
}

int integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) bad(path, "expected an integer");
  const auto i = v.get<std::int64_t>();
  if (i < -1000000000 || i > 1000000000) bad(path, "out of range");
  return static_cast<int>(i);
}

std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) bad(path, "expected a string");
  return v.get<std::string>();
}

void read_number(const json& t, const char* key, const std::string& prefix, double& out) {
  if (t.contains(key)) out = number(t.at(key), join(prefix, key));
}

void read_int(const json& t, const char* key, const std::string& prefix, int& out) {
  if (t.contains(key)) out = integer(t.at(key), join(prefix, key));
}

void positive(double v, const std::string& path) {
  if (!(v > 0.0)) bad(path, "must be > 0");
}

Side parse_side(const std::string& name, const std::string& path) {
  if (name == "left") return Side::left;
  if (name == "right") return Side::right;
  if (name == "bottom") return Side::bottom;
  if (name == "top") return Side::top;
  bad(path, "expected left, right, bottom or top");
}

BoundaryTag parse_tag(const std::string& name, const std::string& path) {
  if (name == "gamma1") return BoundaryTag::gamma1;
  if (name == "gamma2") return BoundaryTag::gamma2;
  bad(path, "expected gamma1 or gamma2");
}

BoundaryPreset read_preset(const json& v, const std::string& path, const std::filesystem::path& base) {
  if (v.is_number()) return BoundaryPreset::constant(number(v, path));
  if (!v.is_object()) bad(path, "expected a number or a table");
  only_keys(v, path, {"kind", "value", "background", "side", "from", "to", "path"});
  if (!v.contains("kind")) bad(path, "missing 'kind' (constant, indicator or table)");
  const std::string kind = text(v.at("kind"), join(path, "kind"));
  BoundaryPreset p;
  auto require = [&](const char* key) -> const json& {
    if (!v.contains(key)) bad(path, std::string("missing '") + key + "' for kind " + kind);
    return v.at(key);
  };
  auto reject = [&](std::initializer_list<const char*> keys) {
    for (const char* key : keys) {
      if (v.contains(key)) bad(join(path, key), "not used by kind " + kind);
    }
  };
  if (kind == "constant") {
    reject({"background", "side", "from", "to", "path"});
    p.kind = PresetKind::constant;
    p.value = number(require("value"), join(path, "value"));
  } else if (kind == "indicator") {
    reject({"path"});
    p.kind = PresetKind::indicator;
    p.side = parse_side(text(require("side"), join(path, "side")), join(path, "side"));
    p.from = number(require("from"), join(path, "from"));
    p.to = number(require("to"), join(path, "to"));
    if (p.to < p.from) bad(join(path, "to"), "must be >= from");
    p.value = v.contains("value") ? number(v.at("value"), join(path, "value")) : 1.0;
    p.background = v.contains("background") ? number(v.at("background"), join(path, "background")) : 0.0;
  } else if (kind == "table") {
    reject({"value", "background", "side", "from", "to"});
    p.kind = PresetKind::table;
    p.table = text(require("path"), join(path, "path"));
    if (p.table.is_relative() && !base.empty()) p.table = base / p.table;
  } else {
    bad(join(path, "kind"), "expected constant, indicator or table");
  }
  return p;
}

// Smallest and largest value a non-table preset can take.
void check_positive_preset(const BoundaryPreset& p, const std::string& path) {
  if (p.kind == PresetKind::table) return;
  if (!(p.value > 0.0)) bad(path, "bounds must be > 0");
  if (p.kind == PresetKind::indicator && !(p.background > 0.0)) bad(join(path, "background"), "bounds must be > 0");
}

bool on_side(const Vec2& x, Side side, const Vec2& lengths) {
  const double tol = 1e-12 * std::max(lengths.x(), lengths.y());
  switch (side) {
    case Side::left: return std::abs(x.x()) <= tol;
    case Side::right: return std::abs(x.x() - lengths.x()) <= tol;
    case Side::bottom: return std::abs(x.y()) <= tol;
    case Side::top: return std::abs(x.y() - lengths.y()) <= tol;
  }
  return false;
}

}  // namespace

BoundaryPreset BoundaryPreset::constant(double v) {
  BoundaryPreset p;
  p.kind = PresetKind::constant;
  p.value = v;
  return p;
}

BoundaryPreset BoundaryPreset::indicator(Side side, double from, double to, double value) {
  BoundaryPreset p;
  p.kind = PresetKind::indicator;
  p.side = side;
  p.from = from;
  p.to = to;
  p.value = value;
  return p;
}

std::optional<OptimizationMethod> parse_method(std::string_view name) {
  if (name == "conditional-gradient") return OptimizationMethod::conditional_gradient;
  if (name == "projected-gradient") return OptimizationMethod::projected_gradient;
  return std::nullopt;
}

RunConfig parse_config(std::string_view source, const std::filesystem::path& base_dir) {
  const json root = parse_toml(source);
  only_keys(root, "", {"mesh", "physics", "time", "cost", "bounds", "initial", "controls", "optimizer", "output"});
  RunConfig c;
  const json empty = json::object();
  auto block = [&](const char* name) -> const json& { return root.contains(name) ? root.at(name) : empty; };

  {
    const json& t = block("mesh");
    only_keys(t, "mesh", {"nx", "ny", "lx", "ly", "boundary_assignment"});
    read_int(t, "nx", "mesh", c.mesh.nx);
    read_int(t, "ny", "mesh", c.mesh.ny);
    read_number(t, "lx", "mesh", c.mesh.lx);
    read_number(t, "ly", "mesh", c.mesh.ly);
    if (c.mesh.nx < 1) bad("mesh.nx", "must be >= 1");
    if (c.mesh.ny < 1) bad("mesh.ny", "must be >= 1");
    positive(c.mesh.lx, "mesh.lx");
    positive(c.mesh.ly, "mesh.ly");
    if (t.contains("boundary_assignment")) {
      const json& a = t.at("boundary_assignment");
      only_keys(a, "mesh.boundary_assignment", {"left", "right", "bottom", "top"});
      for (const auto& [key, value] : a.items()) {
        const std::string p = "mesh.boundary_assignment." + key;
        c.mesh.assignment[parse_side(key, p)] = parse_tag(text(value, p), p);
      }
    }
    bool has1 = false, has2 = false;
    for (const auto& [side, tag] : c.mesh.assignment) {
      has1 = has1 || tag == BoundaryTag::gamma1;
      has2 = has2 || tag == BoundaryTag::gamma2;
    }
    if (!has1) bad("mesh.boundary_assignment", "Γ₁ empty");
    if (!has2) bad("mesh.boundary_assignment", "Γ₂ empty");
  }
  {
    const json& t = block("physics");
    only_keys(t, "physics", {"viscosity", "conductivity", "expansion", "gravity"});
    read_number(t, "viscosity", "physics", c.physics.viscosity);
    read_number(t, "conductivity", "physics", c.physics.conductivity);
    read_number(t, "expansion", "physics", c.physics.expansion);
    positive(c.physics.viscosity, "physics.viscosity");
    positive(c.physics.conductivity, "physics.conductivity");
    if (c.physics.expansion < 0.0) bad("physics.expansion", "must be >= 0");
    if (t.contains("gravity")) {
      const json& g = t.at("gravity");
      if (!g.is_array() || g.size() != 2) bad("physics.gravity", "expected [x, y]");
      c.physics.gravity = {number(g[0], "physics.gravity[0]"), number(g[1], "physics.gravity[1]")};
    }
  }
  {
    const json& t = block("time");
    only_keys(t, "time", {"final_time", "steps"});
    read_number(t, "final_time", "time", c.time.final_time);
    read_int(t, "steps", "time", c.time.steps);
    positive(c.time.final_time, "time.final_time");
    if (c.time.steps < 0) bad("time.steps", "must be >= 0");
  }
  {
    const json& t = block("cost");
    only_keys(t, "cost", {"n1", "n2", "form", "r1", "r2"});
    read_number(t, "n1", "cost", c.cost.n1);
    read_number(t, "n2", "cost", c.cost.n2);
    if (c.cost.n1 < 0.0) bad("cost.n1", "must be >= 0");
    if (c.cost.n2 < 0.0) bad("cost.n2", "must be >= 0");
    if (t.contains("form")) {
      const std::string f = text(t.at("form"), "cost.form");
      if (f == "flux") {
        c.cost.form = CostForm::flux;
      } else if (f == "trace") {
        c.cost.form = CostForm::trace;
      } else {
        bad("cost.form", "expected flux or trace");
      }
    }
    if (t.contains("r1")) c.cost.r1 = read_preset(t.at("r1"), "cost.r1", base_dir);
    if (t.contains("r2")) c.cost.r2 = read_preset(t.at("r2"), "cost.r2", base_dir);
  }
  {
    const json& t = block("bounds");
    only_keys(t, "bounds", {"alpha1", "beta1", "alpha2", "beta2"});
    if (t.contains("alpha1")) c.bounds.alpha1 = read_preset(t.at("alpha1"), "bounds.alpha1", base_dir);
    if (t.contains("beta1")) c.bounds.beta1 = read_preset(t.at("beta1"), "bounds.beta1", base_dir);
    if (t.contains("alpha2")) c.bounds.alpha2 = read_preset(t.at("alpha2"), "bounds.alpha2", base_dir);
    if (t.contains("beta2")) c.bounds.beta2 = read_preset(t.at("beta2"), "bounds.beta2", base_dir);
    check_positive_preset(c.bounds.alpha1, "bounds.alpha1");
    check_positive_preset(c.bounds.beta1, "bounds.beta1");
    check_positive_preset(c.bounds.alpha2, "bounds.alpha2");
    check_positive_preset(c.bounds.beta2, "bounds.beta2");
    auto ordered = [](const BoundaryPreset& lo, const BoundaryPreset& hi, const char* path) {
      if (lo.kind == PresetKind::constant && hi.kind == PresetKind::constant && hi.value < lo.value) {
        bad(path, "must be >= the lower bound");
      }
    };
    ordered(c.bounds.alpha1, c.bounds.beta1, "bounds.beta1");
    ordered(c.bounds.alpha2, c.bounds.beta2, "bounds.beta2");
  }
  {
    const json& t = block("initial");
    only_keys(t, "initial", {"velocity", "velocity_amplitude", "temperature", "temperature_value"});
    if (t.contains("velocity")) {
      const std::string v = text(t.at("velocity"), "initial.velocity");
      if (v == "zero") {
        c.initial.velocity = InitialVelocity::zero;
      } else if (v == "swirl") {
        c.initial.velocity = InitialVelocity::swirl;
      } else {
        bad("initial.velocity", "expected zero or swirl");
      }
    }
    if (t.contains("temperature")) {
      const std::string v = text(t.at("temperature"), "initial.temperature");
      if (v == "zero") {
        c.initial.temperature = InitialTemperature::zero;
      } else if (v == "constant") {
        c.initial.temperature = InitialTemperature::constant;
      } else if (v == "sine") {
        c.initial.temperature = InitialTemperature::sine;
      } else {
        bad("initial.temperature", "expected zero, constant or sine");
      }
    }
    read_number(t, "velocity_amplitude", "initial", c.initial.velocity_amplitude);
    read_number(t, "temperature_value", "initial", c.initial.temperature_value);
  }
  {
    const json& t = block("controls");
    only_keys(t, "controls", {"v1", "v2"});
    if (t.contains("v1")) c.controls.v1 = read_preset(t.at("v1"), "controls.v1", base_dir);
    if (t.contains("v2")) c.controls.v2 = read_preset(t.at("v2"), "controls.v2", base_dir);
  }
  {
    const json& t = block("optimizer");
    only_keys(t, "optimizer", {"method", "gap_tol", "max_iter"});
    if (t.contains("method")) {
      const auto m = parse_method(text(t.at("method"), "optimizer.method"));
      if (!m) bad("optimizer.method", "expected conditional-gradient or projected-gradient");
      c.optimizer.method = *m;
    }
    read_number(t, "gap_tol", "optimizer", c.optimizer.gap_tol);
    read_int(t, "max_iter", "optimizer", c.optimizer.max_iter);
    if (c.optimizer.gap_tol < 0.0) bad("optimizer.gap_tol", "must be >= 0");
    if (c.optimizer.max_iter < 0) bad("optimizer.max_iter", "must be >= 0");
  }
  {
    const json& t = block("output");
    only_keys(t, "output", {"directory", "formats", "precision"});
    if (t.contains("directory")) c.output.directory = text(t.at("directory"), "output.directory");
    if (t.contains("formats")) {
      const json& f = t.at("formats");
      if (!f.is_array()) bad("output.formats", "expected an array of \"vtk\" / \"csv\"");
      c.output.vtk = c.output.csv = false;
      for (std::size_t i = 0; i < f.size(); ++i) {
        const std::string p = "output.formats[" + std::to_string(i) + "]";
        const std::string name = text(f[i], p);
        if (name == "vtk") {
          c.output.vtk = true;
        } else if (name == "csv") {
          c.output.csv = true;
        } else {
          bad(p, "expected vtk or csv");
        }
      }
    }
    read_int(t, "precision", "output", c.output.precision);
    if (c.output.precision < 1 || c.output.precision > 17) bad("output.precision", "must be in 1..17");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Mesh build_mesh(const RunConfig& c) {
  return build_rectangle_mesh(c.mesh.nx, c.mesh.ny, {c.mesh.lx, c.mesh.ly}, c.mesh.assignment);
}

BoundarySeries realize_preset(const BoundaryPreset& preset, const SpaceSet& s, BoundaryTag tag, int steps, double dt,
                              const std::string& path) {
  const BoundaryNodes& part = tag == BoundaryTag::gamma1 ? s.gamma1 : s.gamma2;
  BoundarySeries out(part.size(), steps);
  switch (preset.kind) {
    case PresetKind::constant:
      out.setConstant(preset.value);
      break;
    case PresetKind::indicator: {
      const Vec2 lengths = s.mesh->lengths;
      const double tol = 1e-12 * std::max(lengths.x(), lengths.y());
      for (int i = 0; i < part.size(); ++i) {
        const Vec2& x = s.nodes[static_cast<std::size_t>(part.nodes[static_cast<std::size_t>(i)])];
        const double along = (preset.side == Side::left || preset.side == Side::right) ? x.y() : x.x();
        const bool inside = on_side(x, preset.side, lengths) && along >= preset.from - tol && along <= preset.to + tol;
        out.row(i).setConstant(inside ? preset.value : preset.background);
      }
      break;
    }
    case PresetKind::table: {
      std::vector<BoundaryTableRow> rows;
      try {
        rows = read_boundary_table(preset.table);
      } catch (const ConfigError& e) {
        bad(path, e.what());
      }
      const std::string selector = path.substr(path.find_last_of('.') + 1);
      std::vector<char> seen(static_cast<std::size_t>(out.size()), 0);
      for (const BoundaryTableRow& r : rows) {
        if (!r.control.empty() && r.control != selector) continue;
        const double step_time = r.time / dt;
        const long n = std::lround(step_time);
        if (n < 1 || n > steps || std::abs(step_time - static_cast<double>(n)) > 1e-6) {
          bad(path, "table time " + format_real(r.time) + " is not a step end point of the time grid");
        }
        const int local =
            (r.node >= 0 && r.node < s.node_count()) ? part.local_of_node[static_cast<std::size_t>(r.node)] : -1;
        if (local < 0) bad(path, "table node " + std::to_string(r.node) + " is not on " + to_string(tag));
        const auto flat = static_cast<std::size_t>(local + part.size() * (n - 1));
        if (seen[flat]) bad(path, "table repeats node " + std::to_string(r.node) + " at step " + std::to_string(n));
        seen[flat] = 1;
        out(local, n - 1) = r.value;
      }
      for (std::size_t k = 0; k < seen.size(); ++k) {
        if (!seen[k]) {
          const auto i = static_cast<std::size_t>(static_cast<int>(k) % part.size());
          bad(path, "table misses node " + std::to_string(part.nodes[i]) + " at step " +
                        std::to_string(static_cast<int>(k) / part.size() + 1));
        }
      }
      break;
    }
  }
  return out;
}

ProblemSpec build_problem(const RunConfig& c, const SpaceSet& s) {
  ProblemSpec p;
  p.viscosity = c.physics.viscosity;
  p.conductivity = c.physics.conductivity;
  p.expansion = c.physics.expansion;
  p.gravity = c.physics.gravity;
  p.n1 = c.cost.n1;
  p.n2 = c.cost.n2;
  p.cost_form = c.cost.form;
  p.final_time = c.time.final_time;
  p.steps = c.time.steps;
  const double dt = p.dt();
  p.r1 = realize_preset(c.cost.r1, s, BoundaryTag::gamma1, p.steps, dt, "cost.r1");
  p.r2 = realize_preset(c.cost.r2, s, BoundaryTag::gamma2, p.steps, dt, "cost.r2");
  p.bounds.lower1 = realize_preset(c.bounds.alpha1, s, BoundaryTag::gamma1, p.steps, dt, "bounds.alpha1");
  p.bounds.upper1 = realize_preset(c.bounds.beta1, s, BoundaryTag::gamma1, p.steps, dt, "bounds.beta1");
  p.bounds.lower2 = realize_preset(c.bounds.alpha2, s, BoundaryTag::gamma2, p.steps, dt, "bounds.alpha2");
  p.bounds.upper2 = realize_preset(c.bounds.beta2, s, BoundaryTag::gamma2, p.steps, dt, "bounds.beta2");
  auto check = [](const BoundarySeries& lo, const BoundarySeries& hi, const char* lo_path, const char* hi_path) {
    if ((lo.array() <= 0.0).any()) bad(lo_path, "bounds must be > 0");
    if ((hi.array() < lo.array()).any()) bad(hi_path, "must be >= the lower bound");
  };
  check(p.bounds.lower1, p.bounds.upper1, "bounds.alpha1", "bounds.beta1");
  check(p.bounds.lower2, p.bounds.upper2, "bounds.alpha2", "bounds.beta2");

  const Vec2 len{c.mesh.lx, c.mesh.ly};
  if (c.initial.velocity == InitialVelocity::swirl) {
    const double a = c.initial.velocity_amplitude;
    p.initial_velocity = [a, len](double x, double y) -> Vec2 {
      const double sx = x / len.x(), sy = y / len.y();
      return a * Vec2(std::sin(2 * M_PI * sy) * std::cos(M_PI * sx), std::sin(M_PI * sx) * std::pow(std::sin(M_PI * sy), 2));
    };
  }
  const double w0 = c.initial.temperature_value;
  if (c.initial.temperature == InitialTemperature::constant) {
    p.initial_temperature = [w0](double, double) { return w0; };
  } else if (c.initial.temperature == InitialTemperature::sine) {
    p.initial_temperature = [w0, len](double x, double y) {
      return w0 * std::sin(M_PI * x / len.x()) * std::sin(M_PI * y / len.y());
    };
  }
  return p;
}

ControlTrajectory build_initial_controls(const RunConfig& c, const SpaceSet& s) {
  const int steps = c.time.steps;
  const double dt = steps > 0 ? c.time.final_time / steps : 0.0;
  return {realize_preset(c.controls.v1, s, BoundaryTag::gamma1, steps, dt, "controls.v1"),
          realize_preset(c.controls.v2, s, BoundaryTag::gamma2, steps, dt, "controls.v2")};
}

}  // namespace flexctl
