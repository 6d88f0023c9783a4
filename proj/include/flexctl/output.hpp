#pragma once

#include "flexctl/forward.hpp"
#include "flexctl/sensitivity.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace flexctl {

/// printf %.{precision}g; precision 17 round-trips every double.
std::string format_real(double value, int precision = 17);

/// Legacy ASCII VTK, quadratic triangles on the quadratic nodes. Point data:
/// velocity, total_pressure (linear, interpolated to edge midpoints), temperature.
void write_state_vtk(const std::filesystem::path& file, const SpaceSet& spaces, const State& state, double time,
                     int precision = 17);
/// Point data adjoint_velocity and adjoint_temperature.
void write_adjoint_vtk(const std::filesystem::path& file, const SpaceSet& spaces, const Field& velocity,
                       const Field& temperature, double time, int precision = 17);

/// One row per (control, step, node): control,time,node_id,x,y,value with
/// control "v1" on Γ₁ and "v2" on Γ₂; time is the end of the step.
void write_controls_csv(const std::filesystem::path& file, const SpaceSet& spaces, const ControlTrajectory& controls,
                        double dt, int precision = 17);

/// Like controls.csv, for the switching fields: value is σ (p·n on Γ₁, q on
/// Γ₂), descent is −∂J/∂v, weight the pairing weight of σ.
void write_switching_csv(const std::filesystem::path& file, const SpaceSet& spaces, const SwitchingFields& adjoint,
                         const SwitchingFields& descent, double dt, int precision = 17);

struct BoundaryTableRow {
  std::string control;  // empty when the file has no control column
  double time = 0.0;
  int node = 0;
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
};

/// Reads time,node_id,x,y,value (optionally preceded by control). Throws
/// ConfigError naming the file and line.
std::vector<BoundaryTableRow> read_boundary_table(const std::filesystem::path& file);

/// Header line plus rows, every cell already formatted.
void write_csv(const std::filesystem::path& file, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// iteration,<name>
void write_history_csv(const std::filesystem::path& file, const std::string& name, const std::vector<double>& values,
                       int precision = 17);

void write_energy_csv(const std::filesystem::path& file, const std::vector<EnergyRow>& rows, int precision = 17);

}  // namespace flexctl
