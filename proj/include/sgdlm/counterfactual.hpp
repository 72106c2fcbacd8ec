#pragma once

// Counterfactual analysis after an intervention at time T. Control series
// are observed throughout; experimental series are treated as missing from
// T on (counterfactual model, CFM) or observed with a one-off loss of
// information at T (outcome-adaptive model, OAM).

#include "sgdlm/engine.hpp"
#include "sgdlm/marglik.hpp"

#include <optional>
#include <vector>

namespace sgdlm {

struct InterventionSpec {
  Eigen::Index T = 0;  // first affected row
  IndexList control;
  IndexList experimental;
  double oam_delta_star = 0.5;
  std::optional<double> oam_beta_star;  // unset: keep the baseline beta

  /// Throws ConfigError unless control/experimental partition 0..q-1 and
  /// there is at least one control.
  void validate(std::size_t q) const;
};

/// Per-draw Gaussian pieces for y_e | y_c. Only the alphas, precisions and
/// weights are stored up front; the factors B (inverse lower Cholesky of
/// Omega_e) and F = Omega_ce B' are made on demand.
struct MixtureConditional {
  IndexList control;
  IndexList experimental;
  std::vector<Vector> alpha;
  std::vector<Matrix> omega;
  Vector log_weight;
  Vector pi;

  struct Factors {
    Matrix B;
    Matrix F;
  };
  Factors factors(std::size_t r) const;

  /// Mean of component r given y_c: alpha_e - B'F'(y_c - alpha_c).
  Vector component_mean(std::size_t r, const Factors& f, const Vector& y_c) const;

  std::size_t size() const { return alpha.size(); }
};

/// Softmax of log weights. Throws DegeneracyError if all are -inf.
Vector mixture_weights(const Vector& log_weight);

/// Builds the mixture from parameter draws at one time point.
MixtureConditional build_mixture(const ModelSpec& spec, const std::vector<Matrix>& theta, const Matrix& lambda,
                                 const std::vector<Vector>& x, const IndexList& control,
                                 const IndexList& experimental, const Vector& y_c);

struct MissingDraws {
  Matrix y_e;                   // q_e x count
  IndexList component;          // selected component per draw
  std::size_t distinct = 0;     // number of factorizations made
};

/// Multinomial component choice by pi, then y_e = alpha_e - B'(F'(y_c -
/// alpha_c) + z). Component selection uses stream (seed, cfm_mixture, t);
/// draw i uses (seed, cfm_mixture, t, i + 1).
MissingDraws sample_missing(const MixtureConditional& mix, const Vector& y_c, std::size_t count, std::uint64_t seed,
                            Eigen::Index t, Exec ex);

/// Exact mean and covariance of the mixture y_e | y_c.
std::pair<Vector, Matrix> mixture_moments(const MixtureConditional& mix, const Vector& y_c);

struct CounterfactualPosterior {
  Eigen::Index t = 0;
  Matrix draws;     // q_e x R
  Vector weights;   // IS weights attached to the draws
  Vector mean;      // weighted sample mean
  Matrix quantiles; // q_e x 3: 5%, 50%, 95%
  Vector mixture_mean;
  Matrix mixture_cov;
};

struct ParameterEnsemble {
  std::vector<Matrix> theta;
  Matrix lambda;
};

/// R draws from the per-series priors, stream (seed, cfm_ensemble, t, j).
ParameterEnsemble draw_prior_ensemble(const ModelSpec& spec, const std::vector<NGPosterior>& priors,
                                      std::uint64_t seed, Eigen::Index t);

struct CfmStepResult {
  SampleSet sample;
  std::vector<NGPosterior> posterior;
  CounterfactualPosterior counterfactual;
  Matrix completed;  // q x R completed data vectors
};

/// CFM update at time t from a given prior ensemble. Each missing-data draw
/// i completes y, is paired with one draw from the naive posteriors given
/// the completed vector, and is weighted by |det(I - Gamma^i)|.
CfmStepResult cfm_step_from_ensemble(const ModelSpec& spec, const InterventionSpec& iv,
                                     const std::vector<NGPosterior>& priors, const ParameterEnsemble& ens,
                                     const std::vector<Vector>& x, const Vector& y_c, std::uint64_t seed,
                                     Eigen::Index t);

CfmStepResult cfm_step(const ModelSpec& spec, const InterventionSpec& iv, const std::vector<NGPosterior>& priors,
                       const std::vector<Vector>& x, const Vector& y_c, std::uint64_t seed, Eigen::Index t);

/// Discounts for the evolution into T under the OAM.
std::vector<DiscountSpec> oam_discounts(const ModelSpec& spec, const InterventionSpec& iv);

/// Plain filter over the whole history with the OAM discounts into T.
FilterResult oam_run(const ModelSpec& spec, const InterventionSpec& iv, const Matrix& history, std::uint64_t seed,
                     const RunOptions& opt = {});

struct EffectSummary {
  Eigen::Index t = 0;
  Vector median;  // per experimental series
  Vector lower;   // 5%
  Vector upper;   // 95%
  Vector mean;
};

/// Distribution of F'theta(CFM) - F'theta(OAM) per experimental series.
/// Each side is resampled by its own weights with stream (seed, effects, t),
/// so identical ensembles give a difference of exactly zero.
EffectSummary effect_summary(const SampleSet& cfm, const SampleSet& oam, const IndexList& experimental,
                             std::uint64_t seed);

struct CounterfactualOptions {
  bool marglik = true;
  std::size_t effect_lead = 3;  // pre-T times included in the effect table
  std::vector<Eigen::Index> monitor_excluded;
};

struct CounterfactualRun {
  InterventionSpec intervention;
  std::vector<StepRecord> pre;  // t < T, shared by both models
  std::vector<StepRecord> oam;  // t >= T
  std::vector<StepRecord> cfm;  // t >= T
  std::vector<CounterfactualPosterior> counterfactual;
  std::vector<EffectSummary> effects;
  MonitorTrajectory monitor;  // OAM against CFM, t >= T
  Matrix cfm_history;         // data with plug-in experimental values from T on
};

CounterfactualRun run_counterfactual(const ModelSpec& spec, const InterventionSpec& iv, const Matrix& history,
                                     std::uint64_t seed, const CounterfactualOptions& opt = {});

/// Quantiles (5%, 50%, 95%) of exp(cumulative log returns) times `anchor`,
/// per time and experimental series, built by resampling each time's
/// counterfactual draws by weight. Returns one q_e x 3 matrix per time.
std::vector<Matrix> counterfactual_levels(const std::vector<CounterfactualPosterior>& cf, const Vector& anchor,
                                          std::uint64_t seed);

}  // namespace sgdlm
