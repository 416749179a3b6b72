#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace miqp_mpc::cli;

  CLI::App app{"Closed-loop experiments for iteration-limited MIQP model predictive control"};
  app.require_subcommand(1);
  app.fallthrough();
  CommonOptions opts;
  std::uint64_t seed = 0;
  app.add_option("--out-dir", opts.out_dir, "Directory for written artifacts")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario's rng_seed");

  std::string scenario;
  auto* run = app.add_subcommand("run", "Run one closed loop and write its trace CSV");
  run->add_option("scenario", scenario, "Scenario file")->required();

  auto* sweep = app.add_subcommand("sweep", "Run every sweep point and write traces plus a summary CSV");
  sweep->add_option("scenario", scenario, "Scenario file")->required();

  std::vector<std::string> traces;
  std::string reference;
  auto* plot = app.add_subcommand("plot", "Write position-plane and error SVG plots");
  plot->add_option("traces", traces, "Trace CSV files")->required();
  auto* ref_opt = plot->add_option("--reference", reference, "Trace to measure tracking error against");

  int sample = 0;
  auto* tree = app.add_subcommand("tree", "Dump the branch-and-bound tree log of one sample");
  tree->add_option("scenario", scenario, "Scenario file")->required();
  tree->add_option("--sample", sample, "Sample index k")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitInput;
  }
  if (seed_opt->count()) opts.seed = seed;

  if (run->parsed()) return cmd_run(scenario, opts, std::cout, std::cerr);
  if (sweep->parsed()) return cmd_sweep(scenario, opts, sweep_threads(), std::cout, std::cerr);
  if (plot->parsed()) {
    return cmd_plot(traces, ref_opt->count() ? std::optional<std::string>(reference) : std::nullopt, opts,
                    std::cout, std::cerr);
  }
  return cmd_tree(scenario, sample, opts, std::cout, std::cerr);
}
