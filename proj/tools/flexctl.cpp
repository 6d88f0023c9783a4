// flexctl <simulate|optimize|verify> --config <path> [--out <dir>] [--seed <u64>] [--log-level <level>]

#include "flexctl/error.hpp"
#include "flexctl/run.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <map>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Boundary pressure / heat-flux control of Boussinesq flow"};
  std::string mode_name;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 1;
  std::string level = "info";
  app.add_option("mode", mode_name, "simulate | optimize | verify")
      ->required()
      ->check(CLI::IsMember({"simulate", "optimize", "verify"}));
  app.add_option("--config", config_path, "TOML run configuration")->required();
  app.add_option("--out", out_dir, "output directory (overrides output.directory)");
  app.add_option("--seed", seed, "seed for the randomized checks");
  app.add_option("--log-level", level, "trace | debug | info | warn | error | off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto logger = spdlog::stderr_color_mt("flexctl");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::from_str(level));

  flexctl::RunConfig config;
  try {
    config = flexctl::load_config(config_path);
  } catch (const flexctl::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return 2;
  }
  flexctl::RunOptions options;
  if (!out_dir.empty()) options.out_dir = out_dir;
  options.seed = seed;
  const flexctl::RunResult result = flexctl::run_command(config, *flexctl::parse_mode(mode_name), options);
  if (result.exit_code != 0) {
    spdlog::error("{} failed: {}", result.stage, result.message);
  }
  return result.exit_code;
}
