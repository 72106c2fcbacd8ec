#pragma once

// Data-parallel inner loops of the filter. Each kernel has a serial
// reference in `serial::` and an OpenMP version in `omp::`; both produce
// bitwise-identical output because every parallel task owns its output slot
// and its random stream, and all reductions run in a fixed order inside one
// task.

#include "sgdlm/common.hpp"
#include "sgdlm/random.hpp"
#include "sgdlm/structure.hpp"
#include "sgdlm/udlm.hpp"

#include <vector>

namespace sgdlm::kernels {

/// Placement of state-vector entries into a square coefficient matrix.
struct GammaLayout {
  struct Entry {
    Eigen::Index row;
    Eigen::Index col;
    std::size_t series;
    Eigen::Index state_index;
  };
  Eigen::Index dim = 0;
  IndexList nodes;  // series index of each row/column
  std::vector<Entry> entries;

  /// Fills `out` (dim x dim) with the coefficients of draw r.
  void fill(const std::vector<Matrix>& theta, Eigen::Index r, Matrix& out) const;
};

/// Full q x q layout: gamma(j, h) = gamma_j entry for h in sp(j).
GammaLayout full_layout(const GraphStructure& g, const std::vector<std::size_t>& n_phi);

/// Layout restricted to the cyclic series, the only ones that move
/// det(I - gamma). dim = 0 when the graph is acyclic.
GammaLayout coupled_layout(const GraphStructure& g, const std::vector<std::size_t>& n_phi);

struct VBMoments {
  double e_lambda = 0.0;
  double e_log_lambda = 0.0;
  Vector m;  // E[lambda theta] / E[lambda]
  Matrix M;  // E[lambda (theta - m)(theta - m)'] / E[lambda]
};

/// Everything the control-margin kernel needs for one time point.
struct ControlProblem {
  const GammaLayout* layout = nullptr;  // full layout
  const std::vector<Vector>* x = nullptr;  // per-series exogenous regressors
  IndexList control;
  IndexList experimental;
  Vector y_c;
};

namespace serial {

/// log|det(I - gamma^r)| per draw; -inf when singular or, with
/// `reject_explosive`, when the spectral radius of gamma^r is >= 1.
Vector log_abs_det_batch(const GammaLayout& layout, const std::vector<Matrix>& theta, Eigen::Index R,
                         bool reject_explosive);

/// R independent draws from each NG, stream keyed by (seed, stream, key, j).
void draw_ng_batch(const std::vector<NGPosterior>& ng, std::size_t R, std::uint64_t seed, Stream stream,
                   std::uint64_t key, std::vector<Matrix>& theta, Matrix& lambda);

/// Weighted moment sums for every series with mask[j] set.
std::vector<VBMoments> vb_moments(const std::vector<Matrix>& theta, const Matrix& lambda, const Vector& w,
                                  const std::vector<bool>& mask);

/// Log density of the controls under each draw's implied joint normal.
Vector control_loglik_batch(const ControlProblem& p, const std::vector<Matrix>& theta, const Matrix& lambda);

}  // namespace serial

namespace omp {

Vector log_abs_det_batch(const GammaLayout& layout, const std::vector<Matrix>& theta, Eigen::Index R,
                         bool reject_explosive);
void draw_ng_batch(const std::vector<NGPosterior>& ng, std::size_t R, std::uint64_t seed, Stream stream,
                   std::uint64_t key, std::vector<Matrix>& theta, Matrix& lambda);
std::vector<VBMoments> vb_moments(const std::vector<Matrix>& theta, const Matrix& lambda, const Vector& w,
                                  const std::vector<bool>& mask);
Vector control_loglik_batch(const ControlProblem& p, const std::vector<Matrix>& theta, const Matrix& lambda);

}  // namespace omp

// Dispatch on the execution policy.
Vector log_abs_det_batch(Exec ex, const GammaLayout& layout, const std::vector<Matrix>& theta, Eigen::Index R,
                         bool reject_explosive);
void draw_ng_batch(Exec ex, const std::vector<NGPosterior>& ng, std::size_t R, std::uint64_t seed, Stream stream,
                   std::uint64_t key, std::vector<Matrix>& theta, Matrix& lambda);
std::vector<VBMoments> vb_moments(Exec ex, const std::vector<Matrix>& theta, const Matrix& lambda,
                                  const Vector& w, const std::vector<bool>& mask);
Vector control_loglik_batch(Exec ex, const ControlProblem& p, const std::vector<Matrix>& theta,
                            const Matrix& lambda);

/// Log density of y_c ~ N(alpha_c, Sigma_c) for one (gamma, mu, lambda),
/// using Sigma_c^{-1} = Omega_c - F F' with F = Omega_ce B'. Throws
/// NumericalError if Omega_e is not positive definite.
double control_marginal_logpdf(const Matrix& gamma, const Vector& mu, const Vector& lambda,
                               const IndexList& control, const IndexList& experimental, const Vector& y_c);

/// Runs body(i) for i in [0, n), in parallel when ex == Exec::parallel.
/// Exceptions thrown in the body are rethrown on the calling thread (the
/// one from the lowest index wins, so the error is deterministic).
template <class Body>
void for_each_index(Exec ex, std::size_t n, Body&& body);

}  // namespace sgdlm::kernels

#include "sgdlm/kernels_impl.hpp"
