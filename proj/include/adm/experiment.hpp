#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adm/meanfield.hpp"
#include "json.hpp"

namespace adm {

enum class ExperimentKind {
  micro_validate,
  mf_trajectory,
  error_decay,
  equilibrium_scan,
  frontier,
  optimal_u,
};

// Config key value <-> enum value ("micro-validate", ...).
const char* to_string(ExperimentKind kind);
std::optional<ExperimentKind> experiment_from_string(const std::string& name);

enum class OutputFormat { csv, json };

// Initial population for simulate-micro. `fixed` gives every agent
// (alpha0, beta0, p); `uniform` draws per-agent values from the given ranges
// using substream 0 of the experiment seed.
struct InitSpec {
  enum class Mode { fixed, uniform } mode = Mode::fixed;
  double alpha0 = 1.0, beta0 = 1.0;
  double alpha_min = 1.0, alpha_max = 1.0;
  double beta_min = 1.0, beta_max = 1.0;
  double p_min = 0.0, p_max = 1.0;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::mf_trajectory;
  ModelParams params;             // params.u mirrors u_values[0] when present
  std::vector<double> u_values;   // one entry unless the experiment sweeps u
  InitSpec init;
  double x0 = 0.25;
  double n0 = 4.0;
  std::int64_t horizon = 0;
  int runs = 1;
  std::uint64_t seed = 1;
  double delta_u = 1e-6;
  double delta_x = 1e-10;
  std::optional<double> epsilon;  // convergence band; reported when set
  double x_floor = 0.0;
  int grid_size = 1000;
  bool transient_check = false;
  OutputFormat format = OutputFormat::csv;
  std::string output_path = ".";
};

// Invalid or unknown configuration input. `field` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field_name, const std::string& message)
      : std::runtime_error("config field '" + field_name + "': " + message),
        field(std::move(field_name)) {}
  std::string field;
};

// Parses `key = value` lines (# comments) or a JSON object (autodetected by a
// leading '{'). Unknown keys, malformed values, missing required keys, and
// out-of-range values all raise ConfigError. `expected` is the experiment the
// caller is about to run (the CLI subcommand): it fills in a missing
// `experiment` key and must match an explicit one.
ExperimentConfig parse_config_text(const std::string& text,
                                   std::optional<ExperimentKind> expected = std::nullopt);
ExperimentConfig load_config_file(const std::string& path,
                                  std::optional<ExperimentKind> expected = std::nullopt);

// Full resolved config, defaults included; valid as a config file itself
// (manifest round-trips).
nlohmann::json config_to_json(const ExperimentConfig& config);

struct ExperimentResult {
  int exit_code = 0;  // 0 ok, 3 infeasible optimal-u
  std::vector<std::string> files;  // paths written, manifest included
};

// Runs one experiment, writing its artifacts plus manifest.json under
// config.output_path. Identical config and seed give byte-identical files.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace adm
