#pragma once

// Synthetic data from a known parameter schedule, used for oracles and the
// acceptance checks.

#include "sgdlm/engine.hpp"

#include <functional>
#include <vector>

namespace sgdlm {

/// True parameters at one time: per-series state vectors laid out as in the
/// model (phi first, then parental coefficients) and precisions.
struct TrueParameters {
  std::vector<Vector> theta;
  Vector lambda;
};

using TruthSchedule = std::function<TrueParameters(Eigen::Index t)>;

struct Simulation {
  Matrix y;                    // (initial rows + horizon) x q
  std::vector<Matrix> gamma;   // per simulated row
  Matrix mu;                   // horizon x q
  Matrix alpha;                // horizon x q, (I - Gamma)^{-1} mu
  Matrix lambda;               // horizon x q
  Eigen::Index first = 0;      // first simulated row
};

/// y_t ~ N(alpha_t, Omega_t^{-1}) for t = initial.rows() .. + horizon - 1,
/// with regressors built from earlier rows. `initial` must supply at least
/// spec.max_lag() rows. Row t draws from stream (seed, simulate, t).
/// Throws ConfigError if some true Gamma_t has spectral radius >= 1.
Simulation simulate(const ModelSpec& spec, const TruthSchedule& truth, const Matrix& initial, std::size_t horizon,
                    std::uint64_t seed);

/// Constant schedule.
TruthSchedule constant_truth(TrueParameters p);

}  // namespace sgdlm
