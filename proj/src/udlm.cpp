#include "sgdlm/udlm.hpp"

#include "sgdlm/numeric.hpp"

#include <cmath>
#include <numeric>

namespace sgdlm {

void NGPosterior::validate() const {
  if (M.rows() != m.size() || M.cols() != m.size())
    throw DimensionError("NGPosterior: M is " + std::to_string(M.rows()) + "x" + std::to_string(M.cols()) +
                         " but m has length " + std::to_string(m.size()));
  if (n_phi > dim()) throw DimensionError("NGPosterior: phi block larger than state");
  if (!(n > 0.0)) throw NumericalError("NGPosterior: degrees of freedom must be positive");
  if (!(s > 0.0)) throw NumericalError("NGPosterior: scale must be positive");
}

void DiscountSpec::validate() const {
  auto ok = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!ok(delta_phi) || !ok(delta_gamma) || !ok(beta))
    throw ConfigError("discount factors must lie in (0, 1]");
}

double TForecast::logpdf(double y) const { return numeric::t_logpdf(y, location, scale_q, dof); }

TForecast one_step_forecast(const NGPosterior& ng, const Vector& F) {
  if (F.size() != ng.m.size())
    throw DimensionError("one_step_forecast: regression vector has length " + std::to_string(F.size()) +
                         ", state has " + std::to_string(ng.m.size()));
  return {F.dot(ng.m), F.dot(ng.M * F) + ng.s, ng.n};
}

NGPosterior conjugate_update(const NGPosterior& ng, const Vector& F, double y) {
  const TForecast f = one_step_forecast(ng, F);
  if (!(f.scale_q > 0.0) || !std::isfinite(f.scale_q))
    throw NumericalError("conjugate_update: non-positive forecast scale");
  const double e = y - f.location;
  const Vector a = ng.M * F / f.scale_q;
  const double z = (ng.n + e * e / f.scale_q) / (ng.n + 1.0);
  NGPosterior out;
  out.m = ng.m + a * e;
  out.M = numeric::symmetrize((ng.M - a * a.transpose() * f.scale_q) * z);
  out.n = ng.n + 1.0;
  out.s = z * ng.s;
  out.n_phi = ng.n_phi;
  return out;
}

Matrix discount_innovation(const Matrix& P, std::size_t n_phi, const DiscountSpec& d) {
  const auto dim = P.rows();
  const auto np = static_cast<Eigen::Index>(n_phi);
  Matrix W = Matrix::Zero(dim, dim);
  if (np > 0) W.topLeftCorner(np, np) = P.topLeftCorner(np, np) * ((1.0 - d.delta_phi) / d.delta_phi);
  const auto ng = dim - np;
  if (ng > 0)
    W.bottomRightCorner(ng, ng) = P.bottomRightCorner(ng, ng) * ((1.0 - d.delta_gamma) / d.delta_gamma);
  return W;
}

NGPosterior evolve(const NGPosterior& ng, const Matrix& G, const DiscountSpec& d) {
  d.validate();
  NGPosterior out;
  out.n_phi = ng.n_phi;
  Matrix P;
  if (G.size() == 0) {
    out.m = ng.m;
    P = ng.M;
  } else {
    if (G.rows() != G.cols() || G.cols() != ng.m.size()) throw DimensionError("evolve: G does not match state");
    out.m = G * ng.m;
    P = numeric::symmetrize(G * ng.M * G.transpose());
  }
  out.M = P + discount_innovation(P, ng.n_phi, d);
  out.n = d.beta * ng.n;
  out.s = ng.s;
  return out;
}

NGDraw sample_ng_one(const NGPosterior& ng, const Matrix& chol_M, Rng& rng) {
  NGDraw draw;
  draw.lambda = draw_gamma(rng, 0.5 * ng.n, 0.5 * ng.n * ng.s);
  const Vector z = draw_normal_vector(rng, ng.m.size());
  draw.theta = ng.m + chol_M * z / std::sqrt(ng.s * draw.lambda);
  return draw;
}

std::vector<NGDraw> sample_ng(const NGPosterior& ng, std::size_t count, Rng& rng) {
  if (count < 1) throw DimensionError("sample_ng: count must be at least 1");
  ng.validate();
  const Matrix L = numeric::robust_cholesky(ng.M, "sample_ng: M");
  std::vector<NGDraw> out;
  out.reserve(count);
  for (std::size_t r = 0; r < count; ++r) out.push_back(sample_ng_one(ng, L, rng));
  return out;
}

MarginalT marginal_t_subvector(const NGPosterior& ng, const IndexList& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  MarginalT out;
  out.location.resize(k);
  out.scale.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    if (idx[static_cast<std::size_t>(a)] >= ng.dim())
      throw DimensionError("marginal_t_subvector: index " + std::to_string(idx[static_cast<std::size_t>(a)]) +
                           " out of range");
    const auto ia = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(a)]);
    out.location(a) = ng.m(ia);
    for (Eigen::Index b = 0; b < k; ++b) out.scale(a, b) = ng.M(ia, static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)]));
  }
  out.dof = ng.n;
  return out;
}

IndexList gamma_indices(const NGPosterior& ng) {
  IndexList idx(ng.n_gamma());
  std::iota(idx.begin(), idx.end(), ng.n_phi);
  return idx;
}

Vector sample_mvt(const Vector& location, const Matrix& chol_scale, double dof, Rng& rng) {
  const Vector z = draw_normal_vector(rng, location.size());
  const double chi2 = draw_gamma(rng, 0.5 * dof, 0.5);
  return location + chol_scale * z * std::sqrt(dof / chi2);
}

TForecast conditional_predictive_given_gamma(const NGPosterior& ng, const Vector& x, const Vector& gamma) {
  const auto np = static_cast<Eigen::Index>(ng.n_phi);
  const auto ngam = static_cast<Eigen::Index>(ng.n_gamma());
  if (x.size() != np || gamma.size() != ngam)
    throw DimensionError("conditional_predictive_given_gamma: dimension mismatch");
  // Per-unit-precision covariance C = M / s and rate d = n s.
  const Matrix C = ng.M / ng.s;
  const double rate = ng.n * ng.s;
  if (ngam == 0) {
    const double loc = x.dot(ng.m);
    const double var_unit = x.dot(C * x) + 1.0;
    return {loc, var_unit * rate / ng.n, ng.n};
  }
  const Matrix Cgg = C.bottomRightCorner(ngam, ngam);
  Eigen::LLT<Matrix> llt(numeric::symmetrize(Cgg));
  if (llt.info() != Eigen::Success) throw NumericalError("conditional_predictive_given_gamma: gamma block not PD");
  const Vector dev = gamma - ng.m.tail(ngam);
  const Vector sol = llt.solve(dev);
  const double n_c = ng.n + static_cast<double>(ngam);
  const double rate_c = rate + dev.dot(sol);
  double loc = 0.0;
  double var_unit = 1.0;
  if (np > 0) {
    const Matrix Cpg = C.topRightCorner(np, ngam);
    const Vector m_c = ng.m.head(np) + Cpg * sol;
    const Matrix C_c = C.topLeftCorner(np, np) - Cpg * llt.solve(Cpg.transpose());
    loc = x.dot(m_c);
    var_unit += x.dot(C_c * x);
  }
  return {loc, var_unit * rate_c / n_c, n_c};
}

}  // namespace sgdlm
