#include "sgdlm/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace sgdlm::numeric {

Matrix robust_cholesky(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) throw DimensionError(std::string(what) + ": not square");
  if (a.rows() == 0) return Matrix(0, 0);
  Eigen::LLT<Matrix> llt(symmetrize(a));
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double d = static_cast<double>(a.rows());
  double jitter = 1e-12 * a.trace() / d;
  if (!(jitter > 0.0)) jitter = 1e-12;
  Matrix b = symmetrize(a);
  b.diagonal().array() += jitter;
  Eigen::LLT<Matrix> retry(b);
  if (retry.info() != Eigen::Success)
    throw NumericalError(std::string(what) + ": Cholesky factorisation failed (not positive semidefinite)");
  return retry.matrixL();
}

double log_abs_det(const Matrix& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::PartialPivLU<Matrix> lu(a);
  const auto& u = lu.matrixLU();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const double v = std::abs(u(i, i));
    if (v == 0.0) return -std::numeric_limits<double>::infinity();
    acc += std::log(v);
  }
  return acc;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

Vector normalize_log_weights(std::span<const double> log_weights) {
  const auto n = static_cast<Eigen::Index>(log_weights.size());
  if (n == 0) throw DegeneracyError("no weights to normalise");
  const double mx = *std::max_element(log_weights.begin(), log_weights.end());
  if (!(mx > -std::numeric_limits<double>::infinity()) || std::isnan(mx))
    throw DegeneracyError("all log-weights are -inf");
  Vector w(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = std::exp(log_weights[static_cast<std::size_t>(i)] - mx);
    total += w(i);
  }
  w /= total;
  return w;
}

double ess_fraction(const Vector& weights) {
  const double ss = weights.squaredNorm();
  return 1.0 / (static_cast<double>(weights.size()) * ss);
}

double weighted_quantile(std::span<const double> values, const Vector& weights, double p) {
  const std::size_t n = values.size();
  if (n == 0) throw DimensionError("weighted_quantile: empty sample");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double total = weights.sum();
  double cum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += weights(static_cast<Eigen::Index>(order[k]));
    if (cum >= p * total) return values[order[k]];
  }
  return values[order.back()];
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DimensionError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double t_logpdf(double x, double location, double scale_q, double dof) {
  const double z2 = (x - location) * (x - location) / scale_q;
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi * scale_q) -
         0.5 * (dof + 1.0) * std::log1p(z2 / dof);
}

double mvt_logpdf(const Vector& x, const Vector& location, const Matrix& scale, double dof) {
  const double d = static_cast<double>(x.size());
  Eigen::LLT<Matrix> llt(symmetrize(scale));
  if (llt.info() != Eigen::Success) throw NumericalError("mvt_logpdf: scale not positive definite");
  const Vector r = llt.matrixL().solve(x - location);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return std::lgamma(0.5 * (dof + d)) - std::lgamma(0.5 * dof) -
         0.5 * d * std::log(dof * std::numbers::pi) - 0.5 * logdet -
         0.5 * (dof + d) * std::log1p(r.squaredNorm() / dof);
}

double mvn_logpdf_precision(const Vector& x, const Vector& mean, const Matrix& precision) {
  const double d = static_cast<double>(x.size());
  Eigen::LLT<Matrix> llt(symmetrize(precision));
  if (llt.info() != Eigen::Success) throw NumericalError("mvn_logpdf: precision not positive definite");
  const Matrix l = llt.matrixL();
  const Vector r = l.transpose() * (x - mean);
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  return -0.5 * d * std::log(2.0 * std::numbers::pi) + 0.5 * logdet - 0.5 * r.squaredNorm();
}

}  // namespace sgdlm::numeric
