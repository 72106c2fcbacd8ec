#pragma once

// Recouple/decouple filter. Each series keeps its own conjugate NG state;
// at every time point the naive per-series posteriors are sampled jointly,
// reweighted by |det(I - Gamma)|, and projected back onto per-series NG
// forms by moment matching.

#include "sgdlm/common.hpp"
#include "sgdlm/kernels.hpp"
#include "sgdlm/random.hpp"
#include "sgdlm/structure.hpp"
#include "sgdlm/udlm.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace sgdlm {

/// One exogenous regressor: the value of `series` `lag` periods back.
struct LagTerm {
  std::size_t series = 0;
  std::size_t lag = 1;
};

struct SeriesDesign {
  bool intercept = true;
  std::vector<LagTerm> lags;

  std::size_t n_phi() const { return (intercept ? 1 : 0) + lags.size(); }
};

struct ModelSpec {
  GraphStructure graph;
  std::vector<SeriesDesign> design;
  std::vector<Matrix> G;  // per series; empty means identity
  std::vector<DiscountSpec> discount;
  std::vector<NGPosterior> prior;
  std::size_t R = 1000;
  bool reject_explosive = false;
  Exec exec = Exec::parallel;

  std::size_t q() const { return graph.q(); }
  std::size_t max_lag() const;
  std::vector<std::size_t> n_phi() const;

  /// Throws DimensionError / ConfigError when the pieces do not agree.
  void validate() const;
};

/// Exogenous regressors of every series at `row` of `history` (rows are
/// times, columns series). Rows before `row - max_lag` are never touched.
std::vector<Vector> exogenous_regressors(const ModelSpec& spec, const Matrix& history, Eigen::Index row);

/// F_j = (x_j, y_sp(j)).
Vector regression_vector(const ModelSpec& spec, std::size_t j, const Vector& x_j, const Vector& y);

/// Gamma with gamma(j, h) taken from series j's state for h in sp(j).
Matrix assemble_gamma(const GraphStructure& g, const std::vector<Vector>& theta,
                      const std::vector<std::size_t>& n_phi);

/// mu_j = x_j' phi_j.
Vector assemble_mu(const std::vector<Vector>& theta, const std::vector<Vector>& x);

struct JointMoments {
  Vector alpha;
  Matrix omega;
  Matrix gamma;
  Vector mu;
};

/// alpha = (I - Gamma)^{-1} mu, omega = (I - Gamma)' Lambda (I - Gamma).
/// Throws DegeneracyError when I - Gamma is singular.
JointMoments joint_moments(const Matrix& gamma, const Vector& mu, const Vector& lambda);

struct SampleSet {
  Eigen::Index t = 0;
  std::vector<Matrix> theta;  // per series, d_j x R
  Matrix lambda;              // q x R
  Vector log_det;             // log|det(I - Gamma^r)|
  Vector weights;
  double ess_fraction = 1.0;
  std::vector<NGPosterior> naive;
  std::vector<bool> exact;  // series unaffected by the reweighting
  Matrix fitted;            // q x R, F_j' theta_j^r

  std::size_t R() const { return static_cast<std::size_t>(lambda.cols()); }
};

/// Importance-sample update at time t given full y. `x` are the exogenous
/// regressors at t. Draws come from stream (seed, is_draws, t, j).
SampleSet is_update(const ModelSpec& spec, const std::vector<NGPosterior>& priors, const std::vector<Vector>& x,
                    const Vector& y, std::uint64_t seed, Eigen::Index t);

/// Weights, ESS and the degeneracy check shared by every reweighted sample.
void finalize_weights(SampleSet& s, bool coupled);

/// Solves digamma(n/2) - log(n/2) = c for n by safeguarded Newton within
/// [1e-3, 1e6], starting at n0. A root outside the bracket is clamped.
double vb_dof_solve(double c, double n0);

struct VBOptions {
  bool use_exact = true;  // return the naive posterior for series marked exact
};

/// Moment-matching projection onto per-series NG forms. `n_init` seeds the
/// dof solve per series.
std::vector<NGPosterior> vb_decouple(const SampleSet& s, const std::vector<double>& n_init, Exec ex,
                                     const VBOptions& opt = {});

struct MargLikRecord {
  Eigen::Index t = 0;
  double log_f = 0.0;
  double log_g = 0.0;
  double log_pred = 0.0;
  double estimator_variance = 0.0;
  enum class Method { posterior, prior } method = Method::posterior;
};

struct EngineState {
  Eigen::Index t = 0;  // next time to be processed
  std::vector<NGPosterior> prior;
  std::uint64_t seed = 0;
};

struct StepOptions {
  bool marglik = false;
  bool keep_sample = false;
  /// Discounts for the evolution out of this step; empty = spec.discount.
  std::vector<DiscountSpec> evolve_discount;
};

struct StepRecord {
  Eigen::Index t = 0;
  double ess_fraction = 1.0;
  std::vector<TForecast> forecast;  // series j given its parents' values
  std::vector<NGPosterior> posterior;
  std::vector<DiscountSpec> discount_used;
  Matrix gamma_mean;
  Vector lambda_mean;
  Vector fitted_mean;
  std::optional<MargLikRecord> marglik;
};

struct StepResult {
  EngineState next;
  StepRecord record;
  SampleSet sample;  // populated only with keep_sample
};

/// Record fields derived from a weighted sample.
void summarize_sample(const ModelSpec& spec, const SampleSet& s, StepRecord& rec);

/// Evolves VB posteriors to the next prior, using `d` (or spec discounts).
std::vector<NGPosterior> evolve_all(const ModelSpec& spec, const std::vector<NGPosterior>& post,
                                    const std::vector<DiscountSpec>& d);

StepResult step(const ModelSpec& spec, const EngineState& state, const Matrix& history, const StepOptions& opt);

struct RunOptions {
  bool marglik = false;
  Eigen::Index first = -1;  // default: spec.max_lag()
  Eigen::Index last = -1;   // inclusive; default: final row
  /// Evolution into time key uses these discounts instead of spec.discount.
  std::map<Eigen::Index, std::vector<DiscountSpec>> discount_into;
  /// Keep weighted samples for times >= keep_from (negative: none).
  Eigen::Index keep_from = -1;
};

struct FilterResult {
  std::vector<StepRecord> records;
  std::vector<SampleSet> kept;
  EngineState final_state;
  SampleSet last_sample;
};

FilterResult run_filter(const ModelSpec& spec, const Matrix& history, std::uint64_t seed, const RunOptions& opt = {});

struct ForecastPaths {
  Eigen::Index origin = 0;
  std::size_t k = 0;
  std::vector<Matrix> y;  // y[h] is q x R for time origin + 1 + h
  std::size_t resampled = 0;
};

/// k-step simulation from the weighted sample at time `sample.t`, with
/// per-series VB posteriors `post` at that time supplying dof, scale and
/// the deterministic discount recursion.
ForecastPaths forecast_k(const ModelSpec& spec, const SampleSet& sample, const std::vector<NGPosterior>& post,
                         const Matrix& history, std::size_t k, std::size_t R, std::uint64_t seed);

}  // namespace sgdlm
