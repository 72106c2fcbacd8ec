#pragma once

// One-step predictive densities p(y_t | D_{t-1}) = g_t(y_t) * f(y_t), where
// f is the product of per-series T densities given parental values and g
// averages |det(I - Gamma)| over the posterior of the parental coefficients.

#include "sgdlm/engine.hpp"

#include <vector>

namespace sgdlm {

/// Sum over series of the log T predictive of y_j given y_sp(j).
double predictive_product_f(const ModelSpec& spec, const std::vector<NGPosterior>& priors,
                            const std::vector<Vector>& x, const Vector& y);

/// Estimator that samples gamma from its posterior given y. Exact (log_g = 0,
/// zero variance) when the graph has no cycles. Stream (seed, marglik, t, j).
MargLikRecord posterior_estimator(const ModelSpec& spec, const std::vector<NGPosterior>& priors,
                                  const std::vector<Vector>& x, const Vector& y, std::size_t R,
                                  std::uint64_t seed, Eigen::Index t);

/// Baseline estimator that samples gamma from the prior and averages
/// |det(I - Gamma)| times the conditional predictive of y given Gamma.
MargLikRecord prior_estimator(const ModelSpec& spec, const std::vector<NGPosterior>& priors,
                              const std::vector<Vector>& x, const Vector& y, std::size_t R,
                              std::uint64_t seed, Eigen::Index t);

struct MonitorTrajectory {
  std::vector<Eigen::Index> times;
  Vector increment;    // log Bayes factor A:B at each time, 0 if excluded
  Vector cumulative;   // running sum
  Vector probability;  // P(A) from even prior odds
  std::vector<Eigen::Index> excluded;
};

/// Sequential comparison of model A against model B. Throws DimensionError
/// if the record streams are not aligned in time.
MonitorTrajectory monitor(const std::vector<MargLikRecord>& a, const std::vector<MargLikRecord>& b,
                          const std::vector<Eigen::Index>& excluded = {});

struct GridCurve {
  DiscountSpec discount;
  std::vector<Eigen::Index> times;
  Vector log_pred;
  Vector cumulative;
  Vector relative;  // cumulative minus the baseline's cumulative
};

/// Runs the filter once per discount setting (applied to every series) and
/// returns cumulative log predictive curves relative to grid[baseline].
std::vector<GridCurve> discount_grid(const ModelSpec& base, const Matrix& history, std::uint64_t seed,
                                     const std::vector<DiscountSpec>& grid, std::size_t baseline,
                                     const RunOptions& opt = {});

/// The grid of every (delta, beta) pair drawn from `values` (delta shared by
/// both state blocks).
std::vector<DiscountSpec> square_grid(const std::vector<double>& values);

}  // namespace sgdlm
