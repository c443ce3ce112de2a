#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <optional>
#include <typeinfo>

#include "escm/error.hpp"
#include "escm/experiments.hpp"
#include "escm/scenario.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> reps;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "scenario config (JSON)");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--reps", o.reps, "replications per sweep point")->check(CLI::PositiveNumber);
}

escm::ScenarioConfig resolve(const Options& o) {
  escm::ScenarioConfig cfg = o.config.empty() ? escm::parse_config("") : escm::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.reps) cfg.replications = *o.reps;
  cfg.validate();
  return cfg;
}

const char* error_name(const std::exception& e) {
  if (dynamic_cast<const escm::ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const escm::OutputError*>(&e)) return "OutputError";
  if (dynamic_cast<const escm::Error*>(&e)) return "SimulationError";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "InvalidArgument";
  return "InternalError";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge swarm coding and consensus simulator"};
  app.require_subcommand(1);
  Options opts;
  std::string target;

  auto* analyze = app.add_subcommand("analyze", "analytical sweeps");
  analyze->add_option("scenario", target, "fig2 or fig12")->required()->check(CLI::IsMember({"fig2", "fig12"}));
  add_common(analyze, opts);

  auto* simulate = app.add_subcommand("simulate", "simulated sweeps");
  simulate->add_option("scenario", target, "fig10, fig11 or fig13")
      ->required()
      ->check(CLI::IsMember({"fig10", "fig11", "fig13"}));
  add_common(simulate, opts);

  auto* ablate = app.add_subcommand("ablate", "five-configuration ablation at the configured operating point");
  add_common(ablate, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(opts);
    if (ablate->parsed()) {
      const auto rows = escm::run_ablation(cfg, cfg.output_dir);
      std::cout << fmt::format("wrote {} rows to {}/ablation.csv\n", rows.size(), cfg.output_dir);
      return 0;
    }
    const auto name = escm::parse_scenario(target);
    for (const auto& path : escm::run_scenario(*name, cfg, cfg.output_dir)) std::cout << "wrote " << path.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << fmt::format("escm: {}: {}\n", error_name(e), e.what());
    return 2;
  }
}
