// kobalab run <config> [--seed N] [--workers N]
//
// Exit codes: 0 success, 2 invalid config, 3 failure budget exceeded (outputs
// are still written), 4 output not writable, 1 anything else.

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "kobalab/config.hpp"
#include "kobalab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Kobayashi geometry experiment runner"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  std::string config_path;
  std::optional<unsigned> seed;
  std::optional<int> workers;
  run->add_option("config", config_path, "INI config path")->required();
  run->add_option("--seed", seed, "Override experiment.seed");
  run->add_option("--workers", workers, "Worker threads (default: KOBALAB_WORKERS or config)")
      ->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  kobalab::ExperimentConfig config;
  try {
    config = kobalab::load_config(config_path);
    if (seed) config.seed = *seed;
    if (workers) {
      config.workers = *workers;
    } else if (const char* env = std::getenv("KOBALAB_WORKERS")) {
      const int w = std::atoi(env);
      if (w < 1) throw kobalab::ConfigError("KOBALAB_WORKERS must be a positive integer");
      config.workers = w;
    }
    kobalab::validate_config(config);
  } catch (const kobalab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    const kobalab::ReportEnvelope report = kobalab::run(config);
    kobalab::emit(report, config.format, config.output_path);
    std::cout << kobalab::summarize(report);
    return report.exit_code();
  } catch (const kobalab::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const kobalab::InputError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const kobalab::DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
