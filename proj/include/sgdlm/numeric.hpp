#pragma once

#include "sgdlm/common.hpp"

#include <span>

namespace sgdlm::numeric {

/// Lower Cholesky factor of a symmetric PSD matrix. On failure retries once
/// with diagonal jitter 1e-12 * trace / d; throws NumericalError if that
/// also fails.
Matrix robust_cholesky(const Matrix& a, const char* what = "matrix");

/// log|det(a)| via LU with partial pivoting. Returns -inf for exactly
/// singular input.
double log_abs_det(const Matrix& a);

double log_sum_exp(std::span<const double> values);

/// Normalises log-weights in log space (subtract max). Throws
/// DegeneracyError if every entry is -inf.
Vector normalize_log_weights(std::span<const double> log_weights);

/// Kong effective sample size fraction 1 / (R * sum w^2) for normalised w.
double ess_fraction(const Vector& weights);

/// Weighted quantile: smallest value whose cumulative weight reaches p.
double weighted_quantile(std::span<const double> values, const Vector& weights, double p);

/// Quantiles of an equally weighted sample (linear interpolation, type 7).
double quantile(std::vector<double> values, double p);

/// Log density of a univariate Student-t with location, scale (variance-type
/// parameter q) and degrees of freedom.
double t_logpdf(double x, double location, double scale_q, double dof);

/// Log density of a multivariate Student-t with scale matrix `scale`.
double mvt_logpdf(const Vector& x, const Vector& location, const Matrix& scale, double dof);

/// Log density of N(mean, precision^{-1}) parameterised by the precision.
double mvn_logpdf_precision(const Vector& x, const Vector& mean, const Matrix& precision);

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace sgdlm::numeric
