#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adm/errors.hpp"
#include "adm/experiment.hpp"

namespace {

struct SubcommandSpec {
  const char* name;
  adm::ExperimentKind kind;
  const char* blurb;
};

constexpr SubcommandSpec kSubcommands[] = {
    {"simulate-micro", adm::ExperimentKind::micro_validate,
     "Monte Carlo runs of the agent-level simulator with a mean-field overlay"},
    {"mean-field", adm::ExperimentKind::mf_trajectory,
     "Deterministic population-average trajectories"},
    {"error-decay", adm::ExperimentKind::error_decay,
     "Distance to the steady state along a trajectory, with log-log slopes"},
    {"equilibrium-scan", adm::ExperimentKind::equilibrium_scan,
     "Fixed-point residual scan, roots, and uniqueness certificate"},
    {"frontier", adm::ExperimentKind::frontier,
     "Steady-state adherence/throughput across a control sweep"},
    {"optimal-u", adm::ExperimentKind::optimal_u,
     "Largest control keeping steady-state adherence above a floor"},
};

int run_one(adm::ExperimentKind kind, const std::string& config_path,
            const std::string& seed_text, const std::string& out_dir,
            const std::string& format) {
  try {
    adm::ExperimentConfig config = adm::load_config_file(config_path, kind);
    if (!seed_text.empty()) {
      std::uint64_t seed = 0;
      try {
        std::size_t pos = 0;
        seed = std::stoull(seed_text, &pos);
        if (pos != seed_text.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw adm::ConfigError("seed", "expected a nonnegative integer, got '" + seed_text + "'");
      }
      config.seed = seed;
    }
    if (!out_dir.empty()) config.output_path = out_dir;
    if (!format.empty()) {
      if (format == "csv")
        config.format = adm::OutputFormat::csv;
      else if (format == "json")
        config.format = adm::OutputFormat::json;
      else
        throw adm::ConfigError("format", "must be csv or json");
    }

    adm::ExperimentResult result = adm::run_experiment(config);
    for (const std::string& file : result.files) std::cout << "wrote " << file << "\n";
    return result.exit_code;
  } catch (const adm::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const adm::RegimeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiment driver for the adherence-coupled rebalancing model"};
  app.require_subcommand(1);

  std::string config_path, seed_text, out_dir, format;
  std::optional<adm::ExperimentKind> chosen;

  for (const SubcommandSpec& spec : kSubcommands) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.blurb);
    sub->add_option("--config", config_path, "configuration file (key = value or JSON)")
        ->required();
    sub->add_option("--seed", seed_text, "override the config seed");
    sub->add_option("--out", out_dir, "override the config output directory");
    sub->add_option("--format", format, "override the config output format (csv or json)")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->callback([&chosen, kind = spec.kind] { chosen = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad command line counts as invalid config
  }

  if (!chosen) {
    std::cerr << "error: no subcommand selected\n";
    return 2;
  }
  return run_one(*chosen, config_path, seed_text, out_dir, format);
}
