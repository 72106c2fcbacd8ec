// sgdlm: command-line front end. See README for the config format.

#include "sgdlm/driver.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>
#include <map>

int main(int argc, char** argv) {
  CLI::App app{"Sequential Bayesian filtering for simultaneous graphical dynamic linear models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sgdlm::kVersion);

  sgdlm::DriverOptions opt;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
  const std::map<std::string, std::string> help{
      {"fit", "filter over the data; forecast, posterior and marginal likelihood tables"},
      {"forecast", "k-step-ahead forecast paths from the end of the data"},
      {"counterfactual", "counterfactual and outcome-adaptive models, effects and monitor"},
      {"factors", "sparse latent factors from the filtered coefficient matrices"},
      {"discount-grid", "cumulative log predictive over a square grid of discounts"},
      {"simulate", "synthetic data from the configured true parameters"},
      {"diagnose", "structural report on the graph"}};
  for (const auto& name : sgdlm::driver_commands()) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("-c,--config", opt.config, "run config (or a manifest from an earlier run)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out, "output directory (default: config 'output')");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--threads", threads, "OpenMP threads (default: SGDLM_THREADS, then the OpenMP default)")
        ->check(CLI::PositiveNumber);
    sub->callback([&opt, name] { opt.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  for (const auto* sub : app.get_subcommands()) {
    if (sub->count("--out")) opt.out = out;
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--threads")) opt.threads = threads;
  }

  try {
    const auto res = sgdlm::run_command(opt);
    for (const auto& line : res.summary) std::cout << line << '\n';
    std::cout << "outputs in " << res.out_dir.string() << ":";
    for (const auto& name : res.outputs) std::cout << " " << name;
    std::cout << " manifest.json\n";
    return 0;
  } catch (const sgdlm::Error& e) {
    std::cerr << nlohmann::json{{"error", e.kind()}, {"message", e.what()}, {"command", opt.command}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}, {"command", opt.command}}.dump() << '\n';
    return 3;
  }
}
