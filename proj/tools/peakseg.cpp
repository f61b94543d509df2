#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "peakseg/config.hpp"
#include "peakseg/error.hpp"
#include "peakseg/pipeline.hpp"

namespace {

const char *describe(peakseg::Step s) {
  switch (s) {
  case peakseg::Step::synth: return "Generate a synthetic population with ground truth";
  case peakseg::Step::ingest: return "Clean readings and SCADA, aggregate billing, assign roles";
  case peakseg::Step::cmpc: return "Monthly peak contributions, timing features, coincidence";
  case peakseg::Step::cluster: return "Seasonal spectral clustering of observable customers";
  case peakseg::Step::train: return "Fit the seasonal classifiers and clusterwise regressions";
  case peakseg::Step::estimate: return "Estimate contributions of unobservable customers";
  case peakseg::Step::bench: return "Customer peak, entropy and global OLS comparisons";
  case peakseg::Step::dr: return "Simulate direct load control under each targeting strategy";
  case peakseg::Step::report: return "Merge estimates, AUC and seasonal metrics";
  }
  return "";
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Coincident peak contribution pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool strict = false;
  app.add_option("--config", config_path, "TOML config file (defaults apply when omitted)");
  app.add_option("--seed", seed, "Overrides [run] seed and every derived module seed");
  app.add_option("--out", out_dir, "Overrides [paths] out_dir");
  app.add_flag("--strict", strict, "Require inputs to hash-match the run manifest");

  std::optional<peakseg::Step> step;
  bool all = false, print_config = false;
  for (peakseg::Step s : peakseg::kSteps) {
    auto *sub = app.add_subcommand(peakseg::to_string(s), describe(s));
    sub->callback([&step, s] { step = s; });
  }
  app.add_subcommand("all", "Run every step in order")->callback([&] { all = true; });
  app.add_subcommand("config", "Print the effective config as TOML")
      ->callback([&] { print_config = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    peakseg::PipelineConfig cfg =
        config_path.empty() ? peakseg::PipelineConfig{} : peakseg::load_config(config_path);
    if (seed)
      cfg.apply_seed(*seed);
    if (!out_dir.empty())
      cfg.paths.out_dir = out_dir;
    if (print_config) {
      std::cout << peakseg::to_toml(cfg);
      return 0;
    }
    peakseg::Workspace ws(cfg, strict);
    if (all)
      peakseg::run_all(ws);
    else
      peakseg::run_step(ws, *step);
  } catch (const peakseg::Error &e) {
    std::cerr << "peakseg: " << peakseg::to_string(e.code()) << ": " << e.what() << '\n';
    return peakseg::exit_code(e.code());
  } catch (const std::exception &e) {
    std::cerr << "peakseg: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
