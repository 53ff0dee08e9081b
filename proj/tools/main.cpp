// dosreg: run estimator and verification experiments from a config file.
//
//   dosreg run <command> --config PATH [--out DIR] [--seed U64] [--workers N]
//   dosreg reproduce MANIFEST [--workers N]
//
// Exit status: 0 success, 1 reproduce mismatch, 2 validation error,
// 3 numerical failure or failed verification checks.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dosreg/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Density-of-states regularity laboratory"};
  app.set_version_flag("--version", dosreg::code_version());
  app.require_subcommand(1);

  std::string command;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  auto* run = app.add_subcommand("run", "Run an experiment command");
  run->add_option("command", command, "dos, dos-deriv, ids, fracmom, telescope or verify")
      ->required()
      ->check(CLI::IsMember(dosreg::kCommands));
  run->add_option("--config", config_path, "Experiment config (INI)")->required();
  run->add_option("--out", out_dir, "Output directory (default: $DOSREG_OUTPUT_DIR or .)");
  run->add_option("--seed", seed, "Override run.seed");
  run->add_option("--workers", workers, "Override run.workers");

  std::string manifest;
  std::optional<unsigned> repro_workers;
  auto* reproduce = app.add_subcommand("reproduce", "Re-run a manifest and compare outputs");
  reproduce->add_option("manifest", manifest, "run_manifest.json")->required();
  reproduce->add_option("--workers", repro_workers, "Worker count for the re-run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      dosreg::ExperimentConfig config = dosreg::load_config(config_path);
      config.run.command = command;
      if (seed) config.run.seed = *seed;
      if (workers) config.run.workers = *workers;
      const auto outcome = dosreg::run_experiment(config, out_dir, std::cerr);
      if (!outcome.checks_passed) {
        std::cerr << "verification checks failed; see " << outcome.manifest.parent_path().string()
                  << "\n";
        return 3;
      }
      return 0;
    }
    return dosreg::reproduce_manifest(manifest, repro_workers, std::cerr);
  } catch (const dosreg::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const dosreg::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
}
