#pragma once

#include "flexctl/control_opt.hpp"
#include "flexctl/forward.hpp"
#include "flexctl/mesh.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace flexctl {

enum class PresetKind { constant, indicator, table };

/// Boundary data given per node and step.
///   constant:  `value` everywhere.
///   indicator: `value` on the nodes of `side` whose coordinate along the side
///              (x on bottom/top, y on left/right) lies in [from, to],
///              `background` on every other node.
///   table:     CSV with columns time,node_id,x,y,value (an optional leading
///              `control` column selects rows by the preset's key, e.g. "v1").
struct BoundaryPreset {
  PresetKind kind = PresetKind::constant;
  double value = 0.0;
  double background = 0.0;
  Side side = Side::left;
  double from = 0.0;
  double to = 0.0;
  std::filesystem::path table;

  static BoundaryPreset constant(double v);
  static BoundaryPreset indicator(Side side, double from, double to, double value = 1.0);
};

enum class InitialVelocity { zero, swirl };
enum class InitialTemperature { zero, constant, sine };

/// Every block has defaults; the all-default config is the channel problem on
/// an 8 × 8 unit square.
struct RunConfig {
  struct {
    int nx = 8;
    int ny = 8;
    double lx = 1.0;
    double ly = 1.0;
    BoundaryAssignment assignment = default_boundary_assignment();
  } mesh;
  struct {
    double viscosity = 1.0;
    double conductivity = 1.0;
    double expansion = 0.1;
    Vec2 gravity{0.0, -1.0};
  } physics;
  struct {
    double final_time = 0.5;
    int steps = 10;
  } time;
  struct {
    double n1 = 1.0;
    double n2 = 1.0;
    CostForm form = CostForm::flux;
    BoundaryPreset r1 = BoundaryPreset::indicator(Side::right, 0.25, 0.75);
    BoundaryPreset r2 = BoundaryPreset::indicator(Side::bottom, 0.25, 0.75);
  } cost;
  struct {
    BoundaryPreset alpha1 = BoundaryPreset::constant(0.5);
    BoundaryPreset beta1 = BoundaryPreset::constant(1.5);
    BoundaryPreset alpha2 = BoundaryPreset::constant(0.5);
    BoundaryPreset beta2 = BoundaryPreset::constant(1.5);
  } bounds;
  struct {
    InitialVelocity velocity = InitialVelocity::zero;
    double velocity_amplitude = 1.0;
    InitialTemperature temperature = InitialTemperature::zero;
    double temperature_value = 1.0;
  } initial;
  // Control used by simulate and as the optimizer's starting point.
  struct {
    BoundaryPreset v1 = BoundaryPreset::constant(1.0);
    BoundaryPreset v2 = BoundaryPreset::constant(1.0);
  } controls;
  OptimizationOptions optimizer;
  struct {
    std::filesystem::path directory = "out";
    bool vtk = true;
    bool csv = true;
    int precision = 17;
  } output;
};

/// Parses and validates TOML text. Relative table paths resolve against
/// `base_dir`. Errors are ConfigError naming the line or the config path.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});

/// Reads a file and parses it with its directory as base.
RunConfig load_config(const std::filesystem::path& path);

Mesh build_mesh(const RunConfig& config);

/// Lowers the config onto the spaces. Table presets are read here; problems in
/// them are reported as ConfigError with the preset's path.
ProblemSpec build_problem(const RunConfig& config, const SpaceSet& spaces);
ControlTrajectory build_initial_controls(const RunConfig& config, const SpaceSet& spaces);

/// Nodes × steps values of a preset on one boundary part. `path` names the
/// preset in error messages and selects rows when the table has a control column.
BoundarySeries realize_preset(const BoundaryPreset& preset, const SpaceSet& spaces, BoundaryTag tag, int steps,
                              double dt, const std::string& path);

std::optional<OptimizationMethod> parse_method(std::string_view name);

}  // namespace flexctl
