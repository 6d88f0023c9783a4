#include "flexctl/output.hpp"

#include "flexctl/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace flexctl {

namespace {

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& file) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

// Shared geometry part of both VTK files.
void write_vtk_grid(std::ostream& out, const SpaceSet& s, const std::string& title, int precision) {
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << s.node_count() << " double\n";
  for (const Vec2& p : s.nodes) out << format_real(p.x(), precision) << ' ' << format_real(p.y(), precision) << " 0\n";
  const std::size_t cells = s.element_nodes.size();
  out << "CELLS " << cells << ' ' << cells * 7 << '\n';
  for (const auto& e : s.element_nodes) {
    out << 6;
    for (int n : e) out << ' ' << n;
    out << '\n';
  }
  out << "CELL_TYPES " << cells << '\n';
  for (std::size_t c = 0; c < cells; ++c) out << "22\n";  // VTK_QUADRATIC_TRIANGLE
  out << "POINT_DATA " << s.node_count() << '\n';
}

void write_vectors(std::ostream& out, const char* name, const Field& f, int precision) {
  out << "VECTORS " << name << " double\n";
  const auto nodes = f.coefficients.size() / 2;
  for (Eigen::Index i = 0; i < nodes; ++i) {
    out << format_real(f.coefficients(2 * i), precision) << ' ' << format_real(f.coefficients(2 * i + 1), precision)
        << " 0\n";
  }
}

void write_scalars(std::ostream& out, const char* name, const Eigen::VectorXd& values, int precision) {
  out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
  for (Eigen::Index i = 0; i < values.size(); ++i) out << format_real(values(i), precision) << '\n';
}

// Linear pressure on the quadratic nodes: vertex values, midpoints averaged.
Eigen::VectorXd pressure_on_nodes(const SpaceSet& s, const Field& p) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(s.node_count());
  out.head(s.vertex_count()) = p.coefficients;
  for (const auto& e : s.element_nodes) {
    for (int k = 0; k < 3; ++k) {
      out(e[static_cast<std::size_t>(3 + k)]) =
          0.5 * (p.coefficients(e[static_cast<std::size_t>(k)]) + p.coefficients(e[static_cast<std::size_t>((k + 1) % 3)]));
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data() + (!text.empty() && text[0] == '+' ? 1 : 0);
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

}  // namespace

std::string format_real(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, value);
  return buf;
}

void write_state_vtk(const std::filesystem::path& file, const SpaceSet& spaces, const State& state, double time,
                     int precision) {
  auto out = open_out(file);
  write_vtk_grid(out, spaces, "flexctl state t=" + format_real(time, precision), precision);
  write_vectors(out, "velocity", state.velocity, precision);
  write_scalars(out, "total_pressure", pressure_on_nodes(spaces, state.pressure), precision);
  write_scalars(out, "temperature", state.temperature.coefficients, precision);
  finish(out, file);
}

void write_adjoint_vtk(const std::filesystem::path& file, const SpaceSet& spaces, const Field& velocity,
                       const Field& temperature, double time, int precision) {
  auto out = open_out(file);
  write_vtk_grid(out, spaces, "flexctl adjoint t=" + format_real(time, precision), precision);
  write_vectors(out, "adjoint_velocity", velocity, precision);
  write_scalars(out, "adjoint_temperature", temperature.coefficients, precision);
  finish(out, file);
}

void write_controls_csv(const std::filesystem::path& file, const SpaceSet& spaces, const ControlTrajectory& controls,
                        double dt, int precision) {
  std::vector<std::vector<std::string>> rows;
  auto emit = [&](const char* name, const BoundaryNodes& part, const BoundarySeries& v) {
    for (Eigen::Index n = 0; n < v.cols(); ++n) {
      for (int i = 0; i < part.size(); ++i) {
        const int node = part.nodes[static_cast<std::size_t>(i)];
        const Vec2& x = spaces.nodes[static_cast<std::size_t>(node)];
        rows.push_back({name, format_real(static_cast<double>(n + 1) * dt, precision), std::to_string(node),
                        format_real(x.x(), precision), format_real(x.y(), precision),
                        format_real(v(i, n), precision)});
      }
    }
  };
  emit("v1", spaces.gamma1, controls.v1);
  emit("v2", spaces.gamma2, controls.v2);
  write_csv(file, {"control", "time", "node_id", "x", "y", "value"}, rows);
}

void write_switching_csv(const std::filesystem::path& file, const SpaceSet& spaces, const SwitchingFields& adjoint,
                         const SwitchingFields& descent, double dt, int precision) {
  std::vector<std::vector<std::string>> rows;
  auto emit = [&](const char* name, const BoundaryNodes& part, const BoundarySeries& sigma, const BoundarySeries& w,
                  const BoundarySeries& d) {
    for (Eigen::Index n = 0; n < sigma.cols(); ++n) {
      for (int i = 0; i < part.size(); ++i) {
        const int node = part.nodes[static_cast<std::size_t>(i)];
        const Vec2& x = spaces.nodes[static_cast<std::size_t>(node)];
        rows.push_back({name, format_real(static_cast<double>(n + 1) * dt, precision), std::to_string(node),
                        format_real(x.x(), precision), format_real(x.y(), precision),
                        format_real(sigma(i, n), precision), format_real(w(i, n), precision),
                        format_real(d(i, n), precision)});
      }
    }
  };
  emit("v1", spaces.gamma1, adjoint.sigma1, adjoint.weight1, descent.sigma1);
  emit("v2", spaces.gamma2, adjoint.sigma2, adjoint.weight2, descent.sigma2);
  write_csv(file, {"control", "time", "node_id", "x", "y", "value", "weight", "descent"}, rows);
}

std::vector<BoundaryTableRow> read_boundary_table(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string() + ": cannot open table");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(file.string() + ": empty table");
  const std::vector<std::string> header = split(line);
  const std::vector<std::string> plain{"time", "node_id", "x", "y", "value"};
  std::vector<std::string> tagged{"control"};
  tagged.insert(tagged.end(), plain.begin(), plain.end());
  const bool has_control = header == tagged;
  if (!has_control && header != plain) {
    throw ConfigError(file.string() + ": header must be time,node_id,x,y,value (optionally preceded by control)");
  }
  std::vector<BoundaryTableRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split(line);
    auto bad = [&](const std::string& what) {
      return ConfigError(file.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    if (cells.size() != header.size()) throw bad("expected " + std::to_string(header.size()) + " columns");
    const std::size_t off = has_control ? 1 : 0;
    BoundaryTableRow r;
    if (has_control) r.control = cells[0];
    if (!parse_number(cells[off], r.time) || !parse_number(cells[off + 1], r.node) ||
        !parse_number(cells[off + 2], r.x) || !parse_number(cells[off + 3], r.y) ||
        !parse_number(cells[off + 4], r.value)) {
      throw bad("malformed number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_csv(const std::filesystem::path& file, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto out = open_out(file);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  finish(out, file);
}

void write_history_csv(const std::filesystem::path& file, const std::string& name, const std::vector<double>& values,
                       int precision) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < values.size(); ++i) rows.push_back({std::to_string(i), format_real(values[i], precision)});
  write_csv(file, {"iteration", name}, rows);
}

void write_energy_csv(const std::filesystem::path& file, const std::vector<EnergyRow>& rows, int precision) {
  std::vector<std::vector<std::string>> cells;
  for (const EnergyRow& r : rows) {
    cells.push_back({format_real(r.time, precision), format_real(r.kinetic, precision),
                     format_real(r.velocity_lhs, precision), format_real(r.velocity_rhs, precision),
                     format_real(r.velocity_margin(), precision), format_real(r.thermal, precision),
                     format_real(r.temperature_lhs, precision), format_real(r.temperature_rhs, precision),
                     format_real(r.temperature_margin(), precision)});
  }
  write_csv(file,
            {"time", "kinetic", "velocity_lhs", "velocity_rhs", "velocity_margin", "thermal", "temperature_lhs",
             "temperature_rhs", "temperature_margin"},
            cells);
}

}  // namespace flexctl
