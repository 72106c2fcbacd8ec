#include "sgdlm/counterfactual.hpp"

#include "sgdlm/kernels.hpp"
#include "sgdlm/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace sgdlm {

namespace {

std::vector<bool> membership(std::size_t q, const IndexList& idx) {
  std::vector<bool> out(q, false);
  for (auto i : idx) out.at(i) = true;
  return out;
}

Vector pick(const Vector& v, const IndexList& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) out(static_cast<Eigen::Index>(a)) = v(static_cast<Eigen::Index>(idx[a]));
  return out;
}

Matrix pick(const Matrix& m, const IndexList& rows, const IndexList& cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          m(static_cast<Eigen::Index>(rows[a]), static_cast<Eigen::Index>(cols[b]));
  return out;
}

Vector weighted_row_quantiles(const Matrix& draws, const Vector& w, Eigen::Index row, Vector& q3) {
  std::vector<double> v(static_cast<std::size_t>(draws.cols()));
  for (Eigen::Index r = 0; r < draws.cols(); ++r) v[static_cast<std::size_t>(r)] = draws(row, r);
  q3.resize(3);
  q3(0) = numeric::weighted_quantile(v, w, 0.05);
  q3(1) = numeric::weighted_quantile(v, w, 0.5);
  q3(2) = numeric::weighted_quantile(v, w, 0.95);
  return q3;
}

}  // namespace

void InterventionSpec::validate(std::size_t q) const {
  if (control.empty()) throw ConfigError("intervention: at least one control series is required");
  std::vector<int> seen(q, 0);
  for (auto i : control) {
    if (i >= q) throw ConfigError("intervention: control index " + std::to_string(i) + " out of range");
    ++seen[i];
  }
  for (auto i : experimental) {
    if (i >= q) throw ConfigError("intervention: experimental index " + std::to_string(i) + " out of range");
    ++seen[i];
  }
  for (std::size_t j = 0; j < q; ++j)
    if (seen[j] != 1)
      throw ConfigError("intervention: series " + std::to_string(j) +
                        " must be exactly one of control or experimental");
  if (!(oam_delta_star > 0.0 && oam_delta_star <= 1.0)) throw ConfigError("intervention: delta* must lie in (0, 1]");
  if (oam_beta_star && !(*oam_beta_star > 0.0 && *oam_beta_star <= 1.0))
    throw ConfigError("intervention: beta* must lie in (0, 1]");
}

MixtureConditional::Factors MixtureConditional::factors(std::size_t r) const {
  const Matrix oe = pick(omega.at(r), experimental, experimental);
  Eigen::LLT<Matrix> llt(oe);
  if (llt.info() != Eigen::Success) throw NumericalError("mixture: experimental precision is not positive definite");
  Factors f;
  const auto ne = oe.rows();
  f.B = llt.matrixL().solve(Matrix::Identity(ne, ne));
  f.F = pick(omega[r], control, experimental) * f.B.transpose();
  return f;
}

Vector MixtureConditional::component_mean(std::size_t r, const Factors& f, const Vector& y_c) const {
  const Vector dc = y_c - pick(alpha.at(r), control);
  return pick(alpha[r], experimental) - f.B.transpose() * (f.F.transpose() * dc);
}

Vector mixture_weights(const Vector& log_weight) {
  return numeric::normalize_log_weights({log_weight.data(), static_cast<std::size_t>(log_weight.size())});
}

MixtureConditional build_mixture(const ModelSpec& spec, const std::vector<Matrix>& theta, const Matrix& lambda,
                                 const std::vector<Vector>& x, const IndexList& control,
                                 const IndexList& experimental, const Vector& y_c) {
  const auto q = spec.q();
  const auto R = static_cast<std::size_t>(lambda.cols());
  if (theta.size() != q || lambda.rows() != static_cast<Eigen::Index>(q) || x.size() != q)
    throw DimensionError("build_mixture: series count mismatch");
  MixtureConditional mix;
  mix.control = control;
  mix.experimental = experimental;
  mix.alpha.resize(R);
  mix.omega.resize(R);
  mix.log_weight.resize(static_cast<Eigen::Index>(R));
  const auto n_phi = spec.n_phi();
  kernels::for_each_index(spec.exec, R, [&](std::size_t r) {
    const auto c = static_cast<Eigen::Index>(r);
    std::vector<Vector> th(q);
    for (std::size_t j = 0; j < q; ++j) th[j] = theta[j].col(c);
    const Matrix gam = assemble_gamma(spec.graph, th, n_phi);
    const Vector mu = assemble_mu(th, x);
    const Vector lam = lambda.col(c);
    const Matrix A = Matrix::Identity(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q)) - gam;
    if (!std::isfinite(numeric::log_abs_det(A))) {
      mix.log_weight(c) = -std::numeric_limits<double>::infinity();
      mix.alpha[r] = Vector::Zero(static_cast<Eigen::Index>(q));
      mix.omega[r] = Matrix::Identity(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
      return;
    }
    mix.alpha[r] = A.partialPivLu().solve(mu);
    mix.omega[r] = numeric::symmetrize(A.transpose() * lam.asDiagonal() * A);
    mix.log_weight(c) = kernels::control_marginal_logpdf(gam, mu, lam, control, experimental, y_c);
  });
  mix.pi = mixture_weights(mix.log_weight);
  return mix;
}

MissingDraws sample_missing(const MixtureConditional& mix, const Vector& y_c, std::size_t count, std::uint64_t seed,
                            Eigen::Index t, Exec ex) {
  if (count < 1) throw ConfigError("sample_missing: count must be at least 1");
  MissingDraws out;
  Rng sel = make_rng(seed, Stream::cfm_mixture, {static_cast<std::uint64_t>(t)});
  out.component = multinomial_indices(sel, mix.pi, count);
  IndexList distinct = out.component;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  out.distinct = distinct.size();
  // Factor each selected component once, before any draw reads the cache.
  std::vector<MixtureConditional::Factors> fac(distinct.size());
  std::vector<Vector> mean(distinct.size());
  kernels::for_each_index(ex, distinct.size(), [&](std::size_t k) {
    fac[k] = mix.factors(distinct[k]);
    mean[k] = mix.component_mean(distinct[k], fac[k], y_c);
  });
  const auto ne = static_cast<Eigen::Index>(mix.experimental.size());
  out.y_e.resize(ne, static_cast<Eigen::Index>(count));
  kernels::for_each_index(ex, count, [&](std::size_t i) {
    const auto k = static_cast<std::size_t>(
        std::lower_bound(distinct.begin(), distinct.end(), out.component[i]) - distinct.begin());
    Rng rng = make_rng(seed, Stream::cfm_mixture, {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i + 1)});
    const Vector z = draw_normal_vector(rng, ne);
    out.y_e.col(static_cast<Eigen::Index>(i)) = mean[k] - fac[k].B.transpose() * z;
  });
  return out;
}

std::pair<Vector, Matrix> mixture_moments(const MixtureConditional& mix, const Vector& y_c) {
  const auto ne = static_cast<Eigen::Index>(mix.experimental.size());
  Vector mean = Vector::Zero(ne);
  Matrix second = Matrix::Zero(ne, ne);
  for (std::size_t r = 0; r < mix.size(); ++r) {
    const double p = mix.pi(static_cast<Eigen::Index>(r));
    if (p == 0.0) continue;
    const auto f = mix.factors(r);
    const Vector m = mix.component_mean(r, f, y_c);
    mean += p * m;
    second += p * (f.B.transpose() * f.B + m * m.transpose());
  }
  return {mean, numeric::symmetrize(second - mean * mean.transpose())};
}

ParameterEnsemble draw_prior_ensemble(const ModelSpec& spec, const std::vector<NGPosterior>& priors,
                                      std::uint64_t seed, Eigen::Index t) {
  ParameterEnsemble e;
  kernels::draw_ng_batch(spec.exec, priors, spec.R, seed, Stream::cfm_ensemble, static_cast<std::uint64_t>(t),
                         e.theta, e.lambda);
  return e;
}

CfmStepResult cfm_step_from_ensemble(const ModelSpec& spec, const InterventionSpec& iv,
                                     const std::vector<NGPosterior>& priors, const ParameterEnsemble& ens,
                                     const std::vector<Vector>& x, const Vector& y_c, std::uint64_t seed,
                                     Eigen::Index t) {
  const auto q = spec.q();
  iv.validate(q);
  if (priors.size() != q || x.size() != q) throw DimensionError("cfm_step: series count mismatch");
  if (y_c.size() != static_cast<Eigen::Index>(iv.control.size()))
    throw DimensionError("cfm_step: expected " + std::to_string(iv.control.size()) + " control values");
  const std::size_t R = spec.R;
  const auto mix = build_mixture(spec, ens.theta, ens.lambda, x, iv.control, iv.experimental, y_c);
  const auto md = sample_missing(mix, y_c, R, seed, t, spec.exec);

  CfmStepResult res;
  res.completed.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(R));
  for (std::size_t a = 0; a < iv.control.size(); ++a)
    res.completed.row(static_cast<Eigen::Index>(iv.control[a])).setConstant(y_c(static_cast<Eigen::Index>(a)));
  for (std::size_t a = 0; a < iv.experimental.size(); ++a)
    res.completed.row(static_cast<Eigen::Index>(iv.experimental[a])) = md.y_e.row(static_cast<Eigen::Index>(a));

  // Series whose data and parents are all observed keep one naive posterior.
  const auto is_control = membership(q, iv.control);
  const auto coupled = coupled_series(spec.graph);
  SampleSet& s = res.sample;
  s.t = t;
  s.exact.assign(q, false);
  s.naive = priors;
  std::vector<Matrix> chol(q);
  for (std::size_t j = 0; j < q; ++j) {
    bool observed = is_control[j];
    for (auto h : spec.graph.parents(j)) observed = observed && is_control[h];
    s.exact[j] = observed && !coupled[j];
    if (s.exact[j]) {
      const Vector F = regression_vector(spec, j, x[j], res.completed.col(0));
      s.naive[j] = conjugate_update(priors[j], F, res.completed(static_cast<Eigen::Index>(j), 0));
      chol[j] = numeric::robust_cholesky(s.naive[j].M, "cfm_step: M");
    }
  }
  s.theta.resize(q);
  for (std::size_t j = 0; j < q; ++j)
    s.theta[j].resize(static_cast<Eigen::Index>(priors[j].dim()), static_cast<Eigen::Index>(R));
  s.lambda.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(R));
  s.fitted.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(R));
  kernels::for_each_index(spec.exec, R, [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    Rng rng = make_rng(seed, Stream::cfm_update, {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i)});
    const Vector y = res.completed.col(c);
    for (std::size_t j = 0; j < q; ++j) {
      const auto J = static_cast<Eigen::Index>(j);
      const Vector F = regression_vector(spec, j, x[j], y);
      NGDraw d;
      if (s.exact[j]) {
        d = sample_ng_one(s.naive[j], chol[j], rng);
      } else {
        const NGPosterior post = conjugate_update(priors[j], F, y(J));
        d = sample_ng_one(post, numeric::robust_cholesky(post.M, "cfm_step: M"), rng);
      }
      s.theta[j].col(c) = d.theta;
      s.lambda(J, c) = d.lambda;
      s.fitted(J, c) = F.dot(d.theta);
    }
  });
  const auto layout = kernels::coupled_layout(spec.graph, spec.n_phi());
  s.log_det = kernels::log_abs_det_batch(spec.exec, layout, s.theta, static_cast<Eigen::Index>(R),
                                         spec.reject_explosive);
  finalize_weights(s, layout.dim > 0);

  std::vector<double> n0(q);
  for (std::size_t j = 0; j < q; ++j) n0[j] = priors[j].n;
  res.posterior = vb_decouple(s, n0, spec.exec);

  auto& cf = res.counterfactual;
  cf.t = t;
  cf.draws = md.y_e;
  cf.weights = s.weights;
  cf.mean = md.y_e * s.weights;
  cf.quantiles.resize(md.y_e.rows(), 3);
  for (Eigen::Index e = 0; e < md.y_e.rows(); ++e) {
    Vector q3;
    weighted_row_quantiles(md.y_e, s.weights, e, q3);
    cf.quantiles.row(e) = q3.transpose();
  }
  std::tie(cf.mixture_mean, cf.mixture_cov) = mixture_moments(mix, y_c);
  return res;
}

CfmStepResult cfm_step(const ModelSpec& spec, const InterventionSpec& iv, const std::vector<NGPosterior>& priors,
                       const std::vector<Vector>& x, const Vector& y_c, std::uint64_t seed, Eigen::Index t) {
  return cfm_step_from_ensemble(spec, iv, priors, draw_prior_ensemble(spec, priors, seed, t), x, y_c, seed, t);
}

std::vector<DiscountSpec> oam_discounts(const ModelSpec& spec, const InterventionSpec& iv) {
  auto d = spec.discount;
  for (auto e : iv.experimental) {
    d.at(e).delta_phi = iv.oam_delta_star;
    d[e].delta_gamma = iv.oam_delta_star;
    if (iv.oam_beta_star) d[e].beta = *iv.oam_beta_star;
  }
  return d;
}

FilterResult oam_run(const ModelSpec& spec, const InterventionSpec& iv, const Matrix& history, std::uint64_t seed,
                     const RunOptions& opt) {
  iv.validate(spec.q());
  RunOptions ro = opt;
  ro.discount_into[iv.T] = oam_discounts(spec, iv);
  return run_filter(spec, history, seed, ro);
}

EffectSummary effect_summary(const SampleSet& cfm, const SampleSet& oam, const IndexList& experimental,
                             std::uint64_t seed) {
  if (cfm.t != oam.t) throw DimensionError("effect_summary: samples are from different times");
  const std::size_t R = std::min(cfm.R(), oam.R());
  if (R == 0) throw DimensionError("effect_summary: empty sample");
  Rng rc = make_rng(seed, Stream::effects, {static_cast<std::uint64_t>(cfm.t)});
  Rng ro = make_rng(seed, Stream::effects, {static_cast<std::uint64_t>(oam.t)});
  const IndexList ic = multinomial_indices(rc, cfm.weights, R);
  const IndexList io = multinomial_indices(ro, oam.weights, R);
  const auto ne = static_cast<Eigen::Index>(experimental.size());
  EffectSummary out;
  out.t = cfm.t;
  out.median.resize(ne);
  out.lower.resize(ne);
  out.upper.resize(ne);
  out.mean.resize(ne);
  std::vector<double> d(R);
  for (Eigen::Index e = 0; e < ne; ++e) {
    const auto row = static_cast<Eigen::Index>(experimental[static_cast<std::size_t>(e)]);
    double acc = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
      d[i] = cfm.fitted(row, static_cast<Eigen::Index>(ic[i])) - oam.fitted(row, static_cast<Eigen::Index>(io[i]));
      acc += d[i];
    }
    out.mean(e) = acc / static_cast<double>(R);
    out.lower(e) = numeric::quantile(d, 0.05);
    out.median(e) = numeric::quantile(d, 0.5);
    out.upper(e) = numeric::quantile(d, 0.95);
  }
  return out;
}

CounterfactualRun run_counterfactual(const ModelSpec& spec, const InterventionSpec& iv, const Matrix& history,
                                     std::uint64_t seed, const CounterfactualOptions& opt) {
  spec.validate();
  iv.validate(spec.q());
  const auto first = static_cast<Eigen::Index>(spec.max_lag());
  if (iv.T <= first || iv.T >= history.rows())
    throw ConfigError("counterfactual: intervention time must leave at least one step on each side");
  CounterfactualRun out;
  out.intervention = iv;

  RunOptions pre;
  pre.marglik = opt.marglik;
  pre.last = iv.T - 1;
  pre.keep_from = std::max(first, iv.T - static_cast<Eigen::Index>(opt.effect_lead));
  auto base = run_filter(spec, history, seed, pre);
  out.pre = base.records;
  for (const auto& s : base.kept) out.effects.push_back(effect_summary(s, s, iv.experimental, seed));

  EngineState oam{iv.T, evolve_all(spec, base.records.back().posterior, oam_discounts(spec, iv)), seed};
  std::vector<NGPosterior> cfm_prior = base.final_state.prior;
  out.cfm_history = history;
  std::vector<MargLikRecord> ml_oam, ml_cfm;

  for (Eigen::Index t = iv.T; t < history.rows(); ++t) {
    StepOptions so;
    so.marglik = opt.marglik;
    so.keep_sample = true;
    auto r = step(spec, oam, history, so);
    oam = std::move(r.next);

    const auto x = exogenous_regressors(spec, out.cfm_history, t);
    const Vector y_full = history.row(t).transpose();
    const Vector y_c = pick(y_full, iv.control);
    auto c = cfm_step(spec, iv, cfm_prior, x, y_c, seed, t);

    StepRecord rec;
    rec.t = t;
    // Conditional forecasts use the counterfactual mean for missing parents.
    Vector y_plug = y_full;
    for (std::size_t a = 0; a < iv.experimental.size(); ++a)
      y_plug(static_cast<Eigen::Index>(iv.experimental[a])) = c.counterfactual.mean(static_cast<Eigen::Index>(a));
    for (std::size_t j = 0; j < spec.q(); ++j)
      rec.forecast.push_back(one_step_forecast(cfm_prior[j], regression_vector(spec, j, x[j], y_plug)));
    if (opt.marglik) rec.marglik = posterior_estimator(spec, cfm_prior, x, y_full, spec.R, seed, t);
    rec.posterior = c.posterior;
    rec.discount_used = spec.discount;
    summarize_sample(spec, c.sample, rec);

    out.effects.push_back(effect_summary(c.sample, r.sample, iv.experimental, seed));
    for (std::size_t a = 0; a < iv.experimental.size(); ++a)
      out.cfm_history(t, static_cast<Eigen::Index>(iv.experimental[a])) = c.counterfactual.mean(static_cast<Eigen::Index>(a));
    cfm_prior = evolve_all(spec, c.posterior, {});

    if (opt.marglik) {
      ml_oam.push_back(*r.record.marglik);
      ml_cfm.push_back(*rec.marglik);
    }
    out.oam.push_back(std::move(r.record));
    out.cfm.push_back(std::move(rec));
    out.counterfactual.push_back(std::move(c.counterfactual));
  }
  if (opt.marglik) out.monitor = monitor(ml_oam, ml_cfm, opt.monitor_excluded);
  return out;
}

std::vector<Matrix> counterfactual_levels(const std::vector<CounterfactualPosterior>& cf, const Vector& anchor,
                                          std::uint64_t seed) {
  std::vector<Matrix> out;
  if (cf.empty()) return out;
  const auto ne = cf.front().draws.rows();
  if (anchor.size() != ne) throw DimensionError("counterfactual_levels: anchor length mismatch");
  const auto R = static_cast<std::size_t>(cf.front().draws.cols());
  Matrix cum = Matrix::Zero(ne, static_cast<Eigen::Index>(R));
  for (const auto& c : cf) {
    if (c.draws.rows() != ne || static_cast<std::size_t>(c.draws.cols()) != R)
      throw DimensionError("counterfactual_levels: ragged draws");
    Rng rng = make_rng(seed, Stream::effects, {static_cast<std::uint64_t>(c.t), 1});
    const IndexList idx = resample_shuffled(rng, c.weights, R);
    for (std::size_t i = 0; i < R; ++i) cum.col(static_cast<Eigen::Index>(i)) += c.draws.col(static_cast<Eigen::Index>(idx[i]));
    Matrix q3(ne, 3);
    for (Eigen::Index e = 0; e < ne; ++e) {
      std::vector<double> lv(R);
      for (std::size_t i = 0; i < R; ++i) lv[i] = anchor(e) * std::exp(cum(e, static_cast<Eigen::Index>(i)));
      q3(e, 0) = numeric::quantile(lv, 0.05);
      q3(e, 1) = numeric::quantile(lv, 0.5);
      q3(e, 2) = numeric::quantile(std::move(lv), 0.95);
    }
    out.push_back(std::move(q3));
  }
  return out;
}

}  // namespace sgdlm
