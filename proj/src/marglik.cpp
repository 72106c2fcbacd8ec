#include "sgdlm/marglik.hpp"

#include "sgdlm/kernels.hpp"
#include "sgdlm/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace sgdlm {

namespace {

// log mean exp(v) and the delta-method variance of that log estimate.
std::pair<double, double> log_mean_exp(const Vector& v) {
  const double R = static_cast<double>(v.size());
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) throw DegeneracyError("marginal likelihood: every draw has zero weight");
  const Eigen::ArrayXd e = (v.array() - mx).exp();
  const double m1 = e.mean();
  const double m2 = e.square().mean();
  const double var = std::max(0.0, m2 - m1 * m1) / (R * m1 * m1);
  return {mx + std::log(m1), var};
}

// Draws the gamma block of each selected series from the marginal T of `ng`
// into d_j x R state matrices (exogenous rows left at zero).
std::vector<Matrix> draw_gamma_blocks(Exec ex, const std::vector<NGPosterior>& ng, const std::vector<bool>& which,
                                      std::size_t R, std::uint64_t seed, Stream stream, Eigen::Index t) {
  std::vector<Matrix> theta(ng.size());
  kernels::for_each_index(ex, ng.size(), [&](std::size_t j) {
    theta[j] = Matrix::Zero(static_cast<Eigen::Index>(ng[j].dim()), static_cast<Eigen::Index>(R));
    if (!which[j] || ng[j].n_gamma() == 0) return;
    const MarginalT mt = marginal_t_subvector(ng[j], gamma_indices(ng[j]));
    const Matrix L = numeric::robust_cholesky(mt.scale, "marginal likelihood: gamma scale");
    Rng rng = make_rng(seed, stream, {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(j)});
    for (std::size_t r = 0; r < R; ++r)
      theta[j].col(static_cast<Eigen::Index>(r)).tail(mt.location.size()) = sample_mvt(mt.location, L, mt.dof, rng);
  });
  return theta;
}

}  // namespace

double predictive_product_f(const ModelSpec& spec, const std::vector<NGPosterior>& priors,
                            const std::vector<Vector>& x, const Vector& y) {
  if (priors.size() != spec.q() || x.size() != spec.q() || y.size() != static_cast<Eigen::Index>(spec.q()))
    throw DimensionError("predictive_product_f: series count mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < spec.q(); ++j)
    acc += one_step_forecast(priors[j], regression_vector(spec, j, x[j], y)).logpdf(y(static_cast<Eigen::Index>(j)));
  return acc;
}

MargLikRecord posterior_estimator(const ModelSpec& spec, const std::vector<NGPosterior>& priors,
                                  const std::vector<Vector>& x, const Vector& y, std::size_t R,
                                  std::uint64_t seed, Eigen::Index t) {
  if (R < 1) throw ConfigError("posterior_estimator: R must be at least 1");
  MargLikRecord rec;
  rec.t = t;
  rec.method = MargLikRecord::Method::posterior;
  rec.log_f = predictive_product_f(spec, priors, x, y);
  const auto n_phi = spec.n_phi();
  const auto layout = kernels::coupled_layout(spec.graph, n_phi);
  if (layout.dim > 0) {
    const auto coupled = coupled_series(spec.graph);
    std::vector<NGPosterior> post(spec.q());
    for (std::size_t j = 0; j < spec.q(); ++j)
      post[j] = coupled[j] ? conjugate_update(priors[j], regression_vector(spec, j, x[j], y), y(static_cast<Eigen::Index>(j)))
                           : priors[j];
    const auto theta = draw_gamma_blocks(spec.exec, post, coupled, R, seed, Stream::marglik, t);
    const Vector ld = kernels::log_abs_det_batch(spec.exec, layout, theta, static_cast<Eigen::Index>(R), false);
    std::tie(rec.log_g, rec.estimator_variance) = log_mean_exp(ld);
  }
  rec.log_pred = rec.log_f + rec.log_g;
  return rec;
}

MargLikRecord prior_estimator(const ModelSpec& spec, const std::vector<NGPosterior>& priors,
                              const std::vector<Vector>& x, const Vector& y, std::size_t R,
                              std::uint64_t seed, Eigen::Index t) {
  if (R < 1) throw ConfigError("prior_estimator: R must be at least 1");
  const auto q = spec.q();
  MargLikRecord rec;
  rec.t = t;
  rec.method = MargLikRecord::Method::prior;
  rec.log_f = predictive_product_f(spec, priors, x, y);
  const auto n_phi = spec.n_phi();
  std::vector<bool> has_parents(q);
  double constant = 0.0;
  for (std::size_t j = 0; j < q; ++j) {
    has_parents[j] = !spec.graph.parents(j).empty();
    if (!has_parents[j]) constant += one_step_forecast(priors[j], x[j]).logpdf(y(static_cast<Eigen::Index>(j)));
  }
  const auto theta = draw_gamma_blocks(spec.exec, priors, has_parents, R, seed, Stream::prior_marglik, t);
  const auto layout = kernels::coupled_layout(spec.graph, n_phi);
  Vector integrand = kernels::log_abs_det_batch(spec.exec, layout, theta, static_cast<Eigen::Index>(R), false);
  kernels::for_each_index(spec.exec, R, [&](std::size_t r) {
    const auto c = static_cast<Eigen::Index>(r);
    double acc = constant;
    for (std::size_t j = 0; j < q; ++j) {
      if (!has_parents[j]) continue;
      const Vector gam = theta[j].col(c).tail(static_cast<Eigen::Index>(priors[j].n_gamma()));
      const auto& sp = spec.graph.parents(j);
      double resid = y(static_cast<Eigen::Index>(j));
      for (std::size_t k = 0; k < sp.size(); ++k) resid -= gam(static_cast<Eigen::Index>(k)) * y(static_cast<Eigen::Index>(sp[k]));
      acc += conditional_predictive_given_gamma(priors[j], x[j], gam).logpdf(resid);
    }
    integrand(c) += acc;
  });
  std::tie(rec.log_pred, rec.estimator_variance) = log_mean_exp(integrand);
  rec.log_g = rec.log_pred - rec.log_f;
  return rec;
}

MonitorTrajectory monitor(const std::vector<MargLikRecord>& a, const std::vector<MargLikRecord>& b,
                          const std::vector<Eigen::Index>& excluded) {
  if (a.size() != b.size()) throw DimensionError("monitor: record streams have different lengths");
  const auto n = static_cast<Eigen::Index>(a.size());
  MonitorTrajectory out;
  out.excluded = excluded;
  out.increment.resize(n);
  out.cumulative.resize(n);
  out.probability.resize(n);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ra = a[static_cast<std::size_t>(i)];
    const auto& rb = b[static_cast<std::size_t>(i)];
    if (ra.t != rb.t) throw DimensionError("monitor: record times differ at position " + std::to_string(i));
    out.times.push_back(ra.t);
    const bool skip = std::find(excluded.begin(), excluded.end(), ra.t) != excluded.end();
    out.increment(i) = skip ? 0.0 : ra.log_pred - rb.log_pred;
    cum += out.increment(i);
    out.cumulative(i) = cum;
    out.probability(i) = 1.0 / (1.0 + std::exp(-cum));
  }
  return out;
}

std::vector<DiscountSpec> square_grid(const std::vector<double>& values) {
  std::vector<DiscountSpec> out;
  for (double d : values)
    for (double b : values) out.push_back({d, d, b});
  return out;
}

std::vector<GridCurve> discount_grid(const ModelSpec& base, const Matrix& history, std::uint64_t seed,
                                     const std::vector<DiscountSpec>& grid, std::size_t baseline,
                                     const RunOptions& opt) {
  if (grid.empty()) throw ConfigError("discount_grid: empty grid");
  if (baseline >= grid.size()) throw ConfigError("discount_grid: baseline index out of range");
  std::vector<GridCurve> out;
  for (const auto& d : grid) {
    ModelSpec spec = base;
    spec.discount.assign(spec.q(), d);
    RunOptions ro = opt;
    ro.marglik = true;
    ro.keep_from = -1;
    const auto res = run_filter(spec, history, seed, ro);
    GridCurve c;
    c.discount = d;
    const auto n = static_cast<Eigen::Index>(res.records.size());
    c.log_pred.resize(n);
    c.cumulative.resize(n);
    double cum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& rec = res.records[static_cast<std::size_t>(i)];
      c.times.push_back(rec.t);
      c.log_pred(i) = rec.marglik->log_pred;
      cum += c.log_pred(i);
      c.cumulative(i) = cum;
    }
    out.push_back(std::move(c));
  }
  for (auto& c : out) c.relative = c.cumulative - out[baseline].cumulative;
  return out;
}

}  // namespace sgdlm
