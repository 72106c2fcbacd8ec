#include "sgdlm/engine.hpp"

#include "sgdlm/marglik.hpp"
#include "sgdlm/numeric.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sgdlm {

std::size_t ModelSpec::max_lag() const {
  std::size_t out = 0;
  for (const auto& d : design)
    for (const auto& l : d.lags) out = std::max(out, l.lag);
  return out;
}

std::vector<std::size_t> ModelSpec::n_phi() const {
  std::vector<std::size_t> out(design.size());
  for (std::size_t j = 0; j < design.size(); ++j) out[j] = design[j].n_phi();
  return out;
}

void ModelSpec::validate() const {
  const auto Q = q();
  if (Q == 0) throw DimensionError("model has no series");
  if (design.size() != Q || discount.size() != Q || prior.size() != Q)
    throw DimensionError("model: design, discount and prior lists need one entry per series (" +
                         std::to_string(Q) + ")");
  if (!G.empty() && G.size() != Q) throw DimensionError("model: G list needs one entry per series");
  if (R < 1) throw ConfigError("model: R must be at least 1");
  for (std::size_t j = 0; j < Q; ++j) {
    discount[j].validate();
    prior[j].validate();
    for (const auto& l : design[j].lags) {
      if (l.series >= Q) throw DimensionError("model: lag term refers to series " + std::to_string(l.series));
      if (l.lag < 1) throw ConfigError("model: lags must be at least 1");
    }
    const auto expect = design[j].n_phi() + graph.parents(j).size();
    if (prior[j].dim() != expect || prior[j].n_phi != design[j].n_phi())
      throw DimensionError("model: prior for " + graph.label(j) + " has dimension " +
                           std::to_string(prior[j].dim()) + ", expected " + std::to_string(expect));
    if (!G.empty() && G[j].size() != 0 &&
        (G[j].rows() != static_cast<Eigen::Index>(expect) || G[j].cols() != static_cast<Eigen::Index>(expect)))
      throw DimensionError("model: G for " + graph.label(j) + " has the wrong size");
  }
}

std::vector<Vector> exogenous_regressors(const ModelSpec& spec, const Matrix& history, Eigen::Index row) {
  if (row < static_cast<Eigen::Index>(spec.max_lag()) || row >= history.rows())
    throw DimensionError("exogenous_regressors: row " + std::to_string(row) + " has no complete lag window");
  std::vector<Vector> out(spec.q());
  for (std::size_t j = 0; j < spec.q(); ++j) {
    const auto& d = spec.design[j];
    Vector x(static_cast<Eigen::Index>(d.n_phi()));
    Eigen::Index k = 0;
    if (d.intercept) x(k++) = 1.0;
    for (const auto& l : d.lags)
      x(k++) = history(row - static_cast<Eigen::Index>(l.lag), static_cast<Eigen::Index>(l.series));
    out[j] = std::move(x);
  }
  return out;
}

Vector regression_vector(const ModelSpec& spec, std::size_t j, const Vector& x_j, const Vector& y) {
  const auto& sp = spec.graph.parents(j);
  Vector F(x_j.size() + static_cast<Eigen::Index>(sp.size()));
  F.head(x_j.size()) = x_j;
  for (std::size_t k = 0; k < sp.size(); ++k)
    F(x_j.size() + static_cast<Eigen::Index>(k)) = y(static_cast<Eigen::Index>(sp[k]));
  return F;
}

Matrix assemble_gamma(const GraphStructure& g, const std::vector<Vector>& theta,
                      const std::vector<std::size_t>& n_phi) {
  const auto q = static_cast<Eigen::Index>(g.q());
  if (theta.size() != g.q() || n_phi.size() != g.q()) throw DimensionError("assemble_gamma: series count mismatch");
  Matrix out = Matrix::Zero(q, q);
  for (std::size_t j = 0; j < g.q(); ++j) {
    const auto& sp = g.parents(j);
    if (theta[j].size() != static_cast<Eigen::Index>(n_phi[j] + sp.size()))
      throw DimensionError("assemble_gamma: state of " + g.label(j) + " does not match its layout");
    for (std::size_t k = 0; k < sp.size(); ++k)
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(sp[k])) =
          theta[j](static_cast<Eigen::Index>(n_phi[j] + k));
  }
  return out;
}

Vector assemble_mu(const std::vector<Vector>& theta, const std::vector<Vector>& x) {
  if (theta.size() != x.size()) throw DimensionError("assemble_mu: series count mismatch");
  Vector mu(static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j)
    mu(static_cast<Eigen::Index>(j)) = x[j].size() > 0 ? x[j].dot(theta[j].head(x[j].size())) : 0.0;
  return mu;
}

JointMoments joint_moments(const Matrix& gamma, const Vector& mu, const Vector& lambda) {
  const auto q = gamma.rows();
  if (gamma.cols() != q || mu.size() != q || lambda.size() != q)
    throw DimensionError("joint_moments: dimension mismatch");
  const Matrix A = Matrix::Identity(q, q) - gamma;
  if (!std::isfinite(numeric::log_abs_det(A))) throw DegeneracyError("joint_moments: I - Gamma is singular");
  JointMoments out;
  out.gamma = gamma;
  out.mu = mu;
  out.alpha = A.partialPivLu().solve(mu);
  out.omega = numeric::symmetrize(A.transpose() * lambda.asDiagonal() * A);
  return out;
}

void finalize_weights(SampleSet& s, bool coupled) {
  if (!coupled) {
    // Every determinant is one; skip the rounding of the generic path.
    s.weights = Vector::Constant(s.log_det.size(), 1.0 / static_cast<double>(s.log_det.size()));
    s.ess_fraction = 1.0;
    return;
  }
  s.weights = numeric::normalize_log_weights({s.log_det.data(), static_cast<std::size_t>(s.log_det.size())});
  s.ess_fraction = numeric::ess_fraction(s.weights);
  const double R = static_cast<double>(s.weights.size());
  if (coupled && s.ess_fraction * R < std::min(10.0, 0.5 * R))
    throw DegeneracyError("importance weights collapsed at t=" + std::to_string(s.t) + " (ESS " +
                          std::to_string(s.ess_fraction * R) + " of " + std::to_string(s.weights.size()) + ")");
}

SampleSet is_update(const ModelSpec& spec, const std::vector<NGPosterior>& priors, const std::vector<Vector>& x,
                    const Vector& y, std::uint64_t seed, Eigen::Index t) {
  const auto q = spec.q();
  if (priors.size() != q || x.size() != q || y.size() != static_cast<Eigen::Index>(q))
    throw DimensionError("is_update: series count mismatch");
  SampleSet s;
  s.t = t;
  s.naive.resize(q);
  std::vector<Vector> F(q);
  for (std::size_t j = 0; j < q; ++j) {
    F[j] = regression_vector(spec, j, x[j], y);
    s.naive[j] = conjugate_update(priors[j], F[j], y(static_cast<Eigen::Index>(j)));
  }
  kernels::draw_ng_batch(spec.exec, s.naive, spec.R, seed, Stream::is_draws, static_cast<std::uint64_t>(t),
                         s.theta, s.lambda);
  const auto n_phi = spec.n_phi();
  const auto coupled = coupled_series(spec.graph);
  const auto layout = kernels::coupled_layout(spec.graph, n_phi);
  s.log_det = kernels::log_abs_det_batch(spec.exec, layout, s.theta, static_cast<Eigen::Index>(spec.R),
                                         spec.reject_explosive);
  s.exact.resize(q);
  for (std::size_t j = 0; j < q; ++j) s.exact[j] = !coupled[j];
  finalize_weights(s, layout.dim > 0);
  s.fitted.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(spec.R));
  for (std::size_t j = 0; j < q; ++j)
    s.fitted.row(static_cast<Eigen::Index>(j)) = F[j].transpose() * s.theta[j];
  return s;
}

double vb_dof_solve(double c, double n0) {
  constexpr double lo_edge = 1e-3;
  constexpr double hi_edge = 1e6;
  auto h = [c](double n) { return boost::math::digamma(0.5 * n) - std::log(0.5 * n) - c; };
  auto dh = [](double n) { return 0.5 * boost::math::trigamma(0.5 * n) - 1.0 / n; };
  if (std::isnan(c)) throw NumericalError("vb_dof_solve: target is NaN");
  if (h(lo_edge) >= 0.0) return lo_edge;
  if (h(hi_edge) <= 0.0) return hi_edge;
  double lo = lo_edge;
  double hi = hi_edge;
  double n = std::clamp(std::isfinite(n0) ? n0 : 1.0, lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double f = h(n);
    if (f == 0.0) return n;
    if (f < 0.0)
      lo = n;
    else
      hi = n;
    double next = n - f / dh(n);
    // Fall back to a geometric bisection when Newton leaves the bracket.
    if (!(next > lo && next < hi)) next = std::sqrt(lo * hi);
    if (std::abs(next - n) <= 1e-12 * n || hi - lo <= 1e-12 * lo) return next;
    n = next;
  }
  throw NumericalError("vb_dof_solve: no convergence after 100 iterations");
}

std::vector<NGPosterior> vb_decouple(const SampleSet& s, const std::vector<double>& n_init, Exec ex,
                                     const VBOptions& opt) {
  const auto q = s.naive.size();
  if (n_init.size() != q || s.theta.size() != q) throw DimensionError("vb_decouple: series count mismatch");
  std::vector<bool> mask(q);
  bool any = false;
  for (std::size_t j = 0; j < q; ++j) {
    mask[j] = !(opt.use_exact && s.exact[j]);
    any = any || mask[j];
  }
  std::vector<NGPosterior> out(q);
  if (any) {
    if (s.R() < 2) throw DegeneracyError("vb_decouple: needs at least two draws");
    if (s.ess_fraction * static_cast<double>(s.R()) < 2.0)
      throw DegeneracyError("vb_decouple: effective sample size below 2");
  }
  const auto mom = any ? kernels::vb_moments(ex, s.theta, s.lambda, s.weights, mask)
                       : std::vector<kernels::VBMoments>(q);
  for (std::size_t j = 0; j < q; ++j) {
    if (!mask[j]) {
      out[j] = s.naive[j];
      continue;
    }
    NGPosterior& p = out[j];
    p.n_phi = s.naive[j].n_phi;
    p.s = 1.0 / mom[j].e_lambda;
    p.n = vb_dof_solve(mom[j].e_log_lambda + std::log(p.s), n_init[j]);
    p.m = mom[j].m;
    p.M = mom[j].M;
  }
  return out;
}

void summarize_sample(const ModelSpec& spec, const SampleSet& s, StepRecord& rec) {
  const auto q = static_cast<Eigen::Index>(spec.q());
  rec.ess_fraction = s.ess_fraction;
  rec.lambda_mean = s.lambda * s.weights;
  rec.fitted_mean = s.fitted * s.weights;
  rec.gamma_mean = Matrix::Zero(q, q);
  const auto n_phi = spec.n_phi();
  for (std::size_t j = 0; j < spec.q(); ++j) {
    const auto& sp = spec.graph.parents(j);
    for (std::size_t k = 0; k < sp.size(); ++k)
      rec.gamma_mean(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(sp[k])) =
          s.theta[j].row(static_cast<Eigen::Index>(n_phi[j] + k)).dot(s.weights);
  }
}

std::vector<NGPosterior> evolve_all(const ModelSpec& spec, const std::vector<NGPosterior>& post,
                                    const std::vector<DiscountSpec>& d) {
  const auto& disc = d.empty() ? spec.discount : d;
  if (disc.size() != post.size()) throw DimensionError("evolve_all: discount list has the wrong length");
  std::vector<NGPosterior> out(post.size());
  for (std::size_t j = 0; j < post.size(); ++j)
    out[j] = evolve(post[j], spec.G.empty() ? Matrix() : spec.G[j], disc[j]);
  return out;
}

StepResult step(const ModelSpec& spec, const EngineState& state, const Matrix& history, const StepOptions& opt) {
  const auto t = state.t;
  if (t >= history.rows()) throw DimensionError("step: no data at t=" + std::to_string(t));
  const auto x = exogenous_regressors(spec, history, t);
  const Vector y = history.row(t).transpose();
  StepResult res;
  res.record.t = t;
  res.record.forecast.resize(spec.q());
  for (std::size_t j = 0; j < spec.q(); ++j)
    res.record.forecast[j] = one_step_forecast(state.prior[j], regression_vector(spec, j, x[j], y));
  if (opt.marglik) res.record.marglik = posterior_estimator(spec, state.prior, x, y, spec.R, state.seed, t);

  SampleSet s = is_update(spec, state.prior, x, y, state.seed, t);
  std::vector<double> n0(spec.q());
  for (std::size_t j = 0; j < spec.q(); ++j) n0[j] = state.prior[j].n;
  res.record.posterior = vb_decouple(s, n0, spec.exec);
  summarize_sample(spec, s, res.record);
  res.record.discount_used = opt.evolve_discount.empty() ? spec.discount : opt.evolve_discount;

  res.next.t = t + 1;
  res.next.seed = state.seed;
  res.next.prior = evolve_all(spec, res.record.posterior, res.record.discount_used);
  if (opt.keep_sample) res.sample = std::move(s);
  return res;
}

FilterResult run_filter(const ModelSpec& spec, const Matrix& history, std::uint64_t seed, const RunOptions& opt) {
  spec.validate();
  if (history.cols() != static_cast<Eigen::Index>(spec.q()))
    throw DimensionError("run_filter: data has " + std::to_string(history.cols()) + " series, model has " +
                         std::to_string(spec.q()));
  const Eigen::Index first = opt.first >= 0 ? opt.first : static_cast<Eigen::Index>(spec.max_lag());
  const Eigen::Index last = opt.last >= 0 ? opt.last : history.rows() - 1;
  if (first < static_cast<Eigen::Index>(spec.max_lag()) || last >= history.rows() || first > last)
    throw DimensionError("run_filter: invalid time range");
  FilterResult out;
  EngineState state{first, spec.prior, seed};
  for (Eigen::Index t = first; t <= last; ++t) {
    StepOptions so;
    so.marglik = opt.marglik;
    so.keep_sample = true;
    if (auto it = opt.discount_into.find(t + 1); it != opt.discount_into.end()) so.evolve_discount = it->second;
    StepResult r = step(spec, state, history, so);
    out.records.push_back(std::move(r.record));
    if (opt.keep_from >= 0 && t >= opt.keep_from) out.kept.push_back(r.sample);
    if (t == last) out.last_sample = std::move(r.sample);
    state = std::move(r.next);
  }
  out.final_state = std::move(state);
  return out;
}

namespace {

std::size_t pick_index(const Vector& cum, double u) {
  const auto it = std::upper_bound(cum.data(), cum.data() + cum.size(), u * cum(cum.size() - 1));
  return std::min(static_cast<std::size_t>(it - cum.data()), static_cast<std::size_t>(cum.size() - 1));
}

}  // namespace

ForecastPaths forecast_k(const ModelSpec& spec, const SampleSet& sample, const std::vector<NGPosterior>& post,
                         const Matrix& history, std::size_t k, std::size_t R, std::uint64_t seed) {
  if (k < 1) throw ConfigError("forecast_k: horizon must be at least 1");
  if (R < 1) throw ConfigError("forecast_k: need at least one replicate");
  const auto q = spec.q();
  const auto Q = static_cast<Eigen::Index>(q);
  if (post.size() != q || sample.theta.size() != q) throw DimensionError("forecast_k: series count mismatch");
  const auto n_phi = spec.n_phi();
  const Eigen::Index t0 = sample.t;
  const auto L = static_cast<Eigen::Index>(spec.max_lag());

  // Deterministic scale recursion: W[h][j] and the dof entering horizon h.
  std::vector<std::vector<Matrix>> cholW(k, std::vector<Matrix>(q));
  std::vector<std::vector<double>> dof(k, std::vector<double>(q));
  {
    std::vector<Matrix> M(q);
    std::vector<double> n(q);
    for (std::size_t j = 0; j < q; ++j) {
      M[j] = post[j].M;
      n[j] = post[j].n;
    }
    for (std::size_t h = 0; h < k; ++h)
      for (std::size_t j = 0; j < q; ++j) {
        const Matrix& G = spec.G.empty() ? Matrix() : spec.G[j];
        const Matrix P = G.size() == 0 ? M[j] : numeric::symmetrize(G * M[j] * G.transpose());
        const Matrix W = discount_innovation(P, n_phi[j], spec.discount[j]);
        cholW[h][j] = W.isZero(0.0) ? Matrix() : numeric::robust_cholesky(W, "forecast_k: W");
        dof[h][j] = n[j];
        M[j] = P + W;
        n[j] *= spec.discount[j].beta;
      }
  }

  Vector cum(sample.weights.size());
  std::partial_sum(sample.weights.data(), sample.weights.data() + sample.weights.size(), cum.data());

  ForecastPaths out;
  out.origin = t0;
  out.k = k;
  out.y.assign(k, Matrix(Q, static_cast<Eigen::Index>(R)));
  std::vector<std::size_t> redraws(R, 0);

  kernels::for_each_index(spec.exec, R, [&](std::size_t r) {
    Rng rng = make_rng(seed, Stream::forecast, {static_cast<std::uint64_t>(t0), static_cast<std::uint64_t>(r)});
    // Lag window: rows t0 - L + 1 .. t0 of history, then simulated values.
    const Eigen::Index win = L + static_cast<Eigen::Index>(k) + 1;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw DegeneracyError("forecast_k: replicate keeps hitting singular draws");
      Matrix path = Matrix::Zero(win, Q);
      for (Eigen::Index i = 0; i <= L; ++i)
        if (t0 - L + i >= 0) path.row(i) = history.row(t0 - L + i);
      const std::size_t idx = pick_index(cum, draw_uniform(rng));
      std::vector<Vector> theta(q);
      Vector lambda(Q);
      for (std::size_t j = 0; j < q; ++j) {
        theta[j] = sample.theta[j].col(static_cast<Eigen::Index>(idx));
        lambda(static_cast<Eigen::Index>(j)) = sample.lambda(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(idx));
      }
      bool bad = false;
      for (std::size_t h = 0; h < k && !bad; ++h) {
        for (std::size_t j = 0; j < q; ++j) {
          const auto J = static_cast<Eigen::Index>(j);
          const double beta = spec.discount[j].beta;
          if (beta < 1.0) {
            const double eta = draw_beta(rng, 0.5 * beta * dof[h][j], 0.5 * (1.0 - beta) * dof[h][j]);
            lambda(J) *= eta / beta;
          }
          if (!spec.G.empty() && spec.G[j].size() != 0) theta[j] = spec.G[j] * theta[j];
          if (cholW[h][j].size() != 0)
            theta[j] += cholW[h][j] * draw_normal_vector(rng, theta[j].size()) /
                        std::sqrt(post[j].s * lambda(J));
        }
        const Eigen::Index row = L + 1 + static_cast<Eigen::Index>(h);
        std::vector<Vector> x(q);
        for (std::size_t j = 0; j < q; ++j) {
          const auto& d = spec.design[j];
          Vector xj(static_cast<Eigen::Index>(d.n_phi()));
          Eigen::Index c = 0;
          if (d.intercept) xj(c++) = 1.0;
          for (const auto& l : d.lags) xj(c++) = path(row - static_cast<Eigen::Index>(l.lag), static_cast<Eigen::Index>(l.series));
          x[j] = std::move(xj);
        }
        const Matrix gam = assemble_gamma(spec.graph, theta, n_phi);
        const Vector mu = assemble_mu(theta, x);
        const Matrix A = Matrix::Identity(Q, Q) - gam;
        bool singular = !std::isfinite(numeric::log_abs_det(A));
        if (!singular && spec.reject_explosive && Q > 0) {
          const Eigen::VectorXcd ev = Eigen::EigenSolver<Matrix>(gam, false).eigenvalues();
          singular = ev.cwiseAbs().maxCoeff() >= 1.0;
        }
        if (singular) {
          bad = true;
          break;
        }
        Vector nu(Q);
        for (Eigen::Index j = 0; j < Q; ++j) nu(j) = draw_normal(rng) / std::sqrt(lambda(j));
        path.row(row) = A.partialPivLu().solve(mu + nu).transpose();
      }
      if (bad) {
        ++redraws[r];
        continue;
      }
      for (std::size_t h = 0; h < k; ++h)
        out.y[h].col(static_cast<Eigen::Index>(r)) = path.row(L + 1 + static_cast<Eigen::Index>(h)).transpose();
      break;
    }
  });
  for (auto c : redraws) out.resampled += c;
  return out;
}

}  // namespace sgdlm
