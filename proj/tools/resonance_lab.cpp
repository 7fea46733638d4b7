// resonance-lab <subcommand> --config <path> [--seed N] [--out <dir>]

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "reslab/config.hpp"
#include "reslab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for asymptotic bifurcation at resonance"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  for (const auto& name : reslab::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (INI)")->required();
    sub->add_option("--seed", seed, "override [experiment] seed");
    sub->add_option("--out", out_dir, "override [output] dir");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : reslab::kExitConfig;
  }
  const std::string subcommand = app.get_subcommands().front()->get_name();

  try {
    reslab::ExperimentConfig cfg = reslab::load_config(config_path);
    if (seed) cfg.experiment.seed = *seed;
    if (out_dir) cfg.output.dir = *out_dir;
    reslab::validate(cfg);
    const reslab::RunResult r = reslab::run_experiment(cfg, subcommand);
    for (const auto& f : r.files) std::cout << f.string() << "\n";
    std::cout << subcommand << ": " << r.summary << "\n";
    return r.exit_code;
  } catch (const reslab::Error& e) {
    std::cerr << "resonance-lab " << subcommand << " (" << config_path << "): " << e.what() << "\n";
    return reslab::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "resonance-lab " << subcommand << " (" << config_path << "): " << e.what() << "\n";
    return reslab::kExitNumerical;
  }
}
