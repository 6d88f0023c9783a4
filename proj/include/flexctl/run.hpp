#pragma once

#include "flexctl/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flexctl {

enum class RunMode { simulate, optimize, verify };

std::optional<RunMode> parse_mode(std::string_view name);

enum class CheckStatus { pass, fail, info };

/// One line of verify_report.csv. Passing means value <= threshold, or
/// value > threshold when `positive` is set. Info rows never fail.
struct VerifyCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool positive = false;
  CheckStatus status = CheckStatus::info;
};

const char* to_string(CheckStatus s);

/// Invariant suite on one problem: form identities, coercivity, energy
/// margins, divergence residual, pairing identity, gradient check, plus the
/// smallness condition and the boundary flux comparison as info rows.
std::vector<VerifyCheck> verify_suite(const ForwardModel& model, const ControlTrajectory& controls,
                                      std::uint64_t seed);

/// Two readings of Σ dt ∫_{Γ₂} r₂ ∂w/∂n: `recovered` tests the discrete
/// temperature residual with the nodal extension of r₂ (divided by k);
/// `substituted` uses ∂w/∂n = −v₂/k as the cost does.
struct FluxComparison {
  double recovered = 0.0;
  double substituted = 0.0;
};
FluxComparison compare_boundary_flux(const ForwardModel& model, const StateTrajectory& traj,
                                     const ControlTrajectory& controls);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // overrides output.directory
  std::uint64_t seed = 1;
};

/// Exit codes: 0 success, 2 config error, 3 solver failure, 4 verification failure.
struct RunResult {
  int exit_code = 0;
  std::string stage;    // failing stage when exit_code != 0
  std::string message;
  std::vector<VerifyCheck> checks;
};

RunResult run_command(const RunConfig& config, RunMode mode, const RunOptions& options = {});

}  // namespace flexctl
