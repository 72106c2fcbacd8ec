#pragma once

// Univariate conjugate normal-gamma DLM kernel.
//
// An NGPosterior (m, M, n, s) encodes
//   theta | lambda ~ N(m, M / (s * lambda)),  lambda ~ Gamma(n/2, n*s/2),
// so theta is marginally multivariate T_n(m, M) and E[lambda] = 1/s. The
// state splits as theta = (phi, gamma): the first `n_phi` entries are the
// exogenous block, the remainder the simultaneous-parent coefficients.

#include "sgdlm/common.hpp"
#include "sgdlm/random.hpp"

#include <vector>

namespace sgdlm {

struct NGPosterior {
  Vector m;
  Matrix M;
  double n = 1.0;
  double s = 1.0;
  std::size_t n_phi = 0;

  std::size_t dim() const { return static_cast<std::size_t>(m.size()); }
  std::size_t n_gamma() const { return dim() - n_phi; }

  /// Throws DimensionError / NumericalError when the invariants fail.
  void validate() const;
};

struct DiscountSpec {
  double delta_phi = 1.0;
  double delta_gamma = 1.0;
  double beta = 1.0;

  void validate() const;
};

struct TForecast {
  double location = 0.0;
  double scale_q = 1.0;
  double dof = 1.0;

  double logpdf(double y) const;
};

struct NGDraw {
  Vector theta;
  double lambda = 1.0;
};

struct MarginalT {
  Vector location;
  Matrix scale;
  double dof = 1.0;
};

/// location = F'm, scale_q = F'MF + s, dof = n.
TForecast one_step_forecast(const NGPosterior& ng, const Vector& F);

/// Conjugate update on observation y with regression vector F.
NGPosterior conjugate_update(const NGPosterior& ng, const Vector& F, double y);

/// m* = G m, M* = P + W with P = G M G' and block-diagonal discount W,
/// n* = beta n, s* = s. An empty G means identity.
NGPosterior evolve(const NGPosterior& ng, const Matrix& G, const DiscountSpec& d);

/// Block discount innovation W built from P = G M G'.
Matrix discount_innovation(const Matrix& P, std::size_t n_phi, const DiscountSpec& d);

/// `count` joint draws. Deterministic given the generator state.
std::vector<NGDraw> sample_ng(const NGPosterior& ng, std::size_t count, Rng& rng);

/// Single draw using a precomputed lower Cholesky factor of M.
NGDraw sample_ng_one(const NGPosterior& ng, const Matrix& chol_M, Rng& rng);

MarginalT marginal_t_subvector(const NGPosterior& ng, const IndexList& idx);

/// Indices of the gamma block.
IndexList gamma_indices(const NGPosterior& ng);

/// Draw from a multivariate T given a lower Cholesky factor of its scale.
Vector sample_mvt(const Vector& location, const Matrix& chol_scale, double dof, Rng& rng);

/// Predictive of y - y_sp' gamma given the parental coefficients gamma,
/// with phi and lambda integrated out: the conditional normal-gamma of
/// (phi, lambda) given gamma, pushed through the exogenous regression x.
TForecast conditional_predictive_given_gamma(const NGPosterior& ng, const Vector& x,
                                             const Vector& gamma);

}  // namespace sgdlm
