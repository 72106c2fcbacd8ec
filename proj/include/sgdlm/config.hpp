#pragma once

// Run configuration. One JSON document, format version 1:
//
// {
//   "version": 1,
//   "seed": 20150101,                       required, no entropy default
//   "data": {"path": "gdp.csv", "transform": "log-return"},
//   "graph": {"labels": [...], "parents": {"A": ["B"]}}  or  "graph_file": "g.json",
//   "design":   {"intercept": true, "own_lags": []},
//   "prior":    {"m_phi": 0, "v_phi": 1, "m_gamma": 0, "v_gamma": 0.1, "n": 5, "s": 0.01,
//                "m_intercept": 0.05, "v_intercept": 0.0025},   intercept keys optional
//   "discount": {"delta_phi": 0.98, "delta_gamma": 0.98, "beta": 0.98},
//   "series": {"A": {"design": {...}, "prior": {...}, "discount": {...}}},
//   "R": 10000, "reject_explosive": false, "marglik": true,
//   "intervention": {"T": "1990", "control": [...], "experimental": [...],
//                    "delta_star": 0.5, "beta_star": 0.9},
//   "monitor_excluded": ["1993"],
//   "discount_grid": {"values": [0.9, 0.95, 0.98, 1.0], "baseline": {"delta": 0.98, "beta": 0.98}},
//   "forecast": {"k": 5, "R": 2000},
//   "factors": {"reference_time": "1975", "from": "1975"},
//   "simulate": {"horizon": 100, "truth": {"A": {"theta": [...], "lambda": 100}},
//                "shift": {"at": 60, "series": [...], "size": 1.0}},
//   "output": "out"
// }
//
// "series" entries override the shared templates field by field. Relative
// paths resolve against the directory of the config file.

#include "sgdlm/counterfactual.hpp"
#include "sgdlm/engine.hpp"
#include "sgdlm/io.hpp"
#include "sgdlm/simulate.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sgdlm {

inline constexpr int kConfigVersion = 1;

struct PriorTemplate {
  double m_phi = 0.0;
  double v_phi = 1.0;
  double m_gamma = 0.0;
  double v_gamma = 0.1;
  double n = 5.0;
  double s = 0.01;
  std::optional<double> m_intercept;  // override m_phi / v_phi for the intercept entry
  std::optional<double> v_intercept;
};

struct InterventionConfig {
  std::string T;  // time label
  std::vector<std::string> control;
  std::vector<std::string> experimental;
  double delta_star = 0.5;
  std::optional<double> beta_star;
};

struct GridConfig {
  std::vector<double> values;
  double baseline_delta = 1.0;
  double baseline_beta = 1.0;
};

struct ShiftConfig {
  Eigen::Index at = 0;  // simulated row index
  std::vector<std::string> series;
  double size = 0.0;
};

struct SimulationConfig {
  std::size_t horizon = 100;
  std::vector<Vector> theta;  // per series, model layout
  Vector lambda;
  std::optional<ShiftConfig> shift;
};

struct RunConfig {
  nlohmann::json echo;  // the document as read
  std::filesystem::path base_dir;
  std::filesystem::path data_path;
  Transform transform = Transform::log_return;
  GraphStructure graph;
  std::vector<SeriesDesign> design;
  std::vector<PriorTemplate> prior;
  std::vector<DiscountSpec> discount;
  std::size_t R = 1000;
  std::uint64_t seed = 0;
  bool reject_explosive = false;
  bool marglik = false;
  std::optional<InterventionConfig> intervention;
  std::vector<std::string> monitor_excluded;
  std::optional<GridConfig> grid;
  std::size_t forecast_k = 1;
  std::optional<std::size_t> forecast_R;
  std::optional<std::string> factor_reference_time;
  std::optional<std::string> factor_from;
  std::optional<SimulationConfig> simulation;
  std::filesystem::path output_dir = "out";
};

/// Parses and validates a config document. Throws ConfigError with the
/// offending key on any problem.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");

RunConfig load_config(const std::filesystem::path& path);

/// NG prior for series j with d = n_phi + |sp(j)|: mean (m_phi.., m_gamma..),
/// M = diag(v_phi.., v_gamma..). With `intercept` the first entry may take
/// its own mean and variance.
NGPosterior make_prior(const PriorTemplate& p, std::size_t n_phi, std::size_t n_gamma, bool intercept = false);

ModelSpec make_spec(const RunConfig& cfg);

/// Resolves labels against the graph and the intervention time against the
/// ingested time labels.
InterventionSpec resolve_intervention(const RunConfig& cfg, const std::vector<std::string>& times);

/// Row index of a time label. Throws ConfigError when absent.
Eigen::Index time_index(const std::vector<std::string>& times, const std::string& label);

}  // namespace sgdlm
