#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gpe/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Geometry-preserving encoder experiments"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a config file");
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  run->add_option("config", config, "Experiment config (.toml)")->required();
  CLI::Option* out_opt = run->add_option("--out", out, "Output directory");
  CLI::Option* seed_opt = run->add_option("--seed", seed, "Override the config seed");
  CLI::Option* threads_opt = run->add_option("--threads", threads, "Worker thread cap")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gpe::kExitConfigError;
  }

  gpe::RunOptions options;
  options.config = config;
  if (*out_opt) options.out = out;
  if (*seed_opt) options.seed = seed;
  if (*threads_opt) options.threads = threads;
  options.log = &std::cerr;
  return gpe::run_experiment(options);
}
