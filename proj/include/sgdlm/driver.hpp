#pragma once

// Command driver behind the sgdlm executable. Every subcommand reads one
// config, writes export tables into the output directory and finishes with
// manifest.json (config echo with resolved paths, effective seed, versions,
// data shape and the list of files written). A manifest can be passed back
// as --config to repeat the run.

#include "sgdlm/config.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sgdlm {

inline constexpr int kManifestVersion = 1;

struct DriverOptions {
  std::string command;  // fit, forecast, counterfactual, factors, discount-grid, simulate, diagnose
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

struct DriverResult {
  std::filesystem::path out_dir;
  std::vector<std::string> outputs;
  nlohmann::json manifest;
  std::vector<std::string> summary;  // human-readable lines for stdout
};

const std::vector<std::string>& driver_commands();

/// Flag beats the environment value; unset or invalid environment values
/// fall back to the OpenMP default (returns 0 for "leave as is").
int resolve_threads(std::optional<int> flag, const char* env_value);

/// Loads a config file, or the config stored inside a manifest.
RunConfig load_run_config(const std::filesystem::path& path);

DriverResult run_command(const DriverOptions& opt);

/// {labels, parents} document for a graph.
nlohmann::json graph_to_json(const GraphStructure& g);

}  // namespace sgdlm
