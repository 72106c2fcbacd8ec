#pragma once

// Flattening of module outputs into export rows. All summary statistics
// (quantiles included) are computed here so the plotting layer only looks
// values up.

#include "sgdlm/counterfactual.hpp"
#include "sgdlm/engine.hpp"
#include "sgdlm/factors.hpp"
#include "sgdlm/io.hpp"
#include "sgdlm/marglik.hpp"

#include <string>
#include <vector>

namespace sgdlm {

/// Names of the state coefficients of series j: "intercept", "lag:<label>:<k>",
/// then "gamma:<parent label>".
std::vector<std::string> coefficient_names(const ModelSpec& spec, std::size_t j);

/// One-step forecasts given parental values: location, scale, dof, q05, q50,
/// q95 and the observed value.
std::vector<StepRecordRow> forecast_rows(const ModelSpec& spec, const std::vector<StepRecord>& records,
                                         const Matrix& history, const std::vector<std::string>& times);

/// Per-coefficient posterior mean and 5/50/95% marginal T quantiles, mean
/// precision, fitted mean and ESS fraction (label "all").
std::vector<StepRecordRow> posterior_rows(const ModelSpec& spec, const std::vector<StepRecord>& records,
                                          const std::vector<std::string>& times);

std::vector<StepRecordRow> marglik_rows(const std::vector<StepRecord>& records, const std::vector<std::string>& times,
                                        const std::string& label = "all");

std::vector<StepRecordRow> monitor_rows(const MonitorTrajectory& m, const std::vector<std::string>& times,
                                        const std::string& label);

/// Counterfactual quantiles, weighted mean and observed value per
/// experimental series; effect quantiles under statistic prefix "effect_".
std::vector<StepRecordRow> counterfactual_rows(const ModelSpec& spec, const CounterfactualRun& run,
                                               const Matrix& history, const std::vector<std::string>& times);

/// k-step forecast quantiles, statistic "h<k>:q05" etc, t = origin.
std::vector<StepRecordRow> path_rows(const ModelSpec& spec, const ForecastPaths& paths,
                                     const std::vector<std::string>& times);

/// Factor trajectories (label f<k>: phi, d), time-averaged singular values
/// (d_mean), and loadings / scores / Gamma heatmaps at every time (label =
/// series, statistic "L:f<k>", "F:f<k>", "Gamma:<parent>").
std::vector<StepRecordRow> factor_rows(const ModelSpec& spec, const FactorSeries& fs,
                                       const std::vector<Matrix>& gammas, const std::vector<std::string>& times);

std::vector<StepRecordRow> grid_rows(const std::vector<GridCurve>& curves, const std::vector<std::string>& times);

}  // namespace sgdlm
