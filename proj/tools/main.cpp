#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "commands.hpp"
#include "pipenet/scenario_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"1-D polytropic Euler network simulator with entropy-consistent "
               "junction coupling"};
  app.set_version_flag("--version", std::string(pipenet::kVersion));
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  bool mode_compare = false;
  std::uint64_t seed = 42;
  int trials = 100;

  CLI::App* solve =
      app.add_subcommand("solve-junction",
                         "Solve the generalised Riemann problem declared by a "
                         "scenario of constant per-pipe states");
  solve->add_option("config", config, "scenario file")->required();

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run the finite-volume network simulation of a scenario");
  simulate->add_option("config", config, "scenario file")->required();
  simulate->add_option("--out", out_dir, "output directory (overrides the scenario)");
  simulate->add_flag("--mode-compare", mode_compare,
                     "also run the opposite coupling mode and write its "
                     "diagnostics next to the primary ones");

  CLI::App* tube = app.add_subcommand(
      "shock-tube", "Run the two pipes of a scenario as one merged shock tube");
  tube->add_option("config", config, "scenario file")->required();
  tube->add_option("--out", out_dir, "output directory (overrides the scenario)");

  CLI::App* verify = app.add_subcommand(
      "verify", "Randomized self-checks: Jacobian audit, determinant signs, "
                "two-pipe equivalence, Lipschitz probes");
  verify->add_option("--seed", seed, "random seed");
  verify->add_option("--trials", trials, "trials per check (0 skips)");

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) {
    return pipenet::cli::cmd_solve_junction(config, std::cout, std::cerr);
  }
  if (simulate->parsed()) {
    return pipenet::cli::cmd_simulate(config, out_dir, mode_compare, std::cout,
                                      std::cerr);
  }
  if (tube->parsed()) {
    return pipenet::cli::cmd_shock_tube(config, out_dir, std::cout, std::cerr);
  }
  if (verify->parsed()) {
    return pipenet::cli::cmd_verify(seed, trials, std::cout, std::cerr);
  }
  return 1;
}
