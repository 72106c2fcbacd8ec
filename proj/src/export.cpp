#include "sgdlm/export.hpp"

#include "sgdlm/numeric.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>

namespace sgdlm {

namespace {

constexpr double kProbs[3] = {0.05, 0.5, 0.95};
constexpr const char* kQNames[3] = {"q05", "q50", "q95"};

const std::string& time_label(const std::vector<std::string>& times, Eigen::Index t) {
  return times.at(static_cast<std::size_t>(t));
}

double t_quantile(double location, double scale_q, double dof, double p) {
  boost::math::students_t dist(dof);
  return location + std::sqrt(scale_q) * boost::math::quantile(dist, p);
}

}  // namespace

std::vector<std::string> coefficient_names(const ModelSpec& spec, std::size_t j) {
  std::vector<std::string> names;
  const auto& d = spec.design.at(j);
  if (d.intercept) names.push_back("intercept");
  for (const auto& l : d.lags) names.push_back("lag:" + spec.graph.label(l.series) + ":" + std::to_string(l.lag));
  for (auto h : spec.graph.parents(j)) names.push_back("gamma:" + spec.graph.label(h));
  return names;
}

std::vector<StepRecordRow> forecast_rows(const ModelSpec& spec, const std::vector<StepRecord>& records,
                                         const Matrix& history, const std::vector<std::string>& times) {
  std::vector<StepRecordRow> rows;
  for (const auto& r : records) {
    const auto& t = time_label(times, r.t);
    for (std::size_t j = 0; j < r.forecast.size(); ++j) {
      const auto& f = r.forecast[j];
      const auto& label = spec.graph.label(j);
      rows.push_back({t, RowKind::forecast, label, "location", f.location});
      rows.push_back({t, RowKind::forecast, label, "scale", std::sqrt(f.scale_q)});
      rows.push_back({t, RowKind::forecast, label, "dof", f.dof});
      for (int k = 0; k < 3; ++k)
        rows.push_back({t, RowKind::forecast, label, kQNames[k], t_quantile(f.location, f.scale_q, f.dof, kProbs[k])});
      rows.push_back({t, RowKind::forecast, label, "observed", history(r.t, static_cast<Eigen::Index>(j))});
    }
  }
  return rows;
}

std::vector<StepRecordRow> posterior_rows(const ModelSpec& spec, const std::vector<StepRecord>& records,
                                          const std::vector<std::string>& times) {
  std::vector<StepRecordRow> rows;
  for (const auto& r : records) {
    const auto& t = time_label(times, r.t);
    rows.push_back({t, RowKind::posterior, "all", "ess_fraction", r.ess_fraction});
    for (std::size_t j = 0; j < r.posterior.size(); ++j) {
      const auto& ng = r.posterior[j];
      const auto& label = spec.graph.label(j);
      const auto names = coefficient_names(spec, j);
      for (std::size_t i = 0; i < names.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        rows.push_back({t, RowKind::posterior, label, names[i] + ":mean", ng.m(k)});
        for (int a = 0; a < 3; ++a)
          rows.push_back({t, RowKind::posterior, label, names[i] + ":" + kQNames[a],
                          t_quantile(ng.m(k), ng.M(k, k) * ng.s, ng.n, kProbs[a])});
      }
      rows.push_back({t, RowKind::posterior, label, "lambda_mean", r.lambda_mean(static_cast<Eigen::Index>(j))});
      rows.push_back({t, RowKind::posterior, label, "fitted_mean", r.fitted_mean(static_cast<Eigen::Index>(j))});
      rows.push_back({t, RowKind::posterior, label, "dof", ng.n});
      rows.push_back({t, RowKind::posterior, label, "s", ng.s});
    }
  }
  return rows;
}

std::vector<StepRecordRow> marglik_rows(const std::vector<StepRecord>& records, const std::vector<std::string>& times,
                                        const std::string& label) {
  std::vector<StepRecordRow> rows;
  for (const auto& r : records) {
    if (!r.marglik) continue;
    const auto& t = time_label(times, r.t);
    rows.push_back({t, RowKind::marglik, label, "log_f", r.marglik->log_f});
    rows.push_back({t, RowKind::marglik, label, "log_g", r.marglik->log_g});
    rows.push_back({t, RowKind::marglik, label, "log_pred", r.marglik->log_pred});
    rows.push_back({t, RowKind::marglik, label, "estimator_variance", r.marglik->estimator_variance});
  }
  return rows;
}

std::vector<StepRecordRow> monitor_rows(const MonitorTrajectory& m, const std::vector<std::string>& times,
                                        const std::string& label) {
  std::vector<StepRecordRow> rows;
  for (std::size_t i = 0; i < m.times.size(); ++i) {
    const auto& t = time_label(times, m.times[i]);
    const auto k = static_cast<Eigen::Index>(i);
    rows.push_back({t, RowKind::monitor, label, "log_bayes_factor", m.increment(k)});
    rows.push_back({t, RowKind::monitor, label, "cumulative", m.cumulative(k)});
    rows.push_back({t, RowKind::monitor, label, "probability", m.probability(k)});
    const bool ex = std::find(m.excluded.begin(), m.excluded.end(), m.times[i]) != m.excluded.end();
    rows.push_back({t, RowKind::monitor, label, "excluded", ex ? 1.0 : 0.0});
  }
  return rows;
}

std::vector<StepRecordRow> counterfactual_rows(const ModelSpec& spec, const CounterfactualRun& run,
                                               const Matrix& history, const std::vector<std::string>& times) {
  std::vector<StepRecordRow> rows;
  const auto& ex = run.intervention.experimental;
  for (const auto& cf : run.counterfactual) {
    const auto& t = time_label(times, cf.t);
    for (std::size_t a = 0; a < ex.size(); ++a) {
      const auto e = static_cast<Eigen::Index>(a);
      const auto& label = spec.graph.label(ex[a]);
      for (int k = 0; k < 3; ++k) rows.push_back({t, RowKind::counterfactual, label, kQNames[k], cf.quantiles(e, k)});
      rows.push_back({t, RowKind::counterfactual, label, "mean", cf.mean(e)});
      rows.push_back({t, RowKind::counterfactual, label, "mixture_mean", cf.mixture_mean(e)});
      rows.push_back({t, RowKind::counterfactual, label, "mixture_sd", std::sqrt(cf.mixture_cov(e, e))});
      rows.push_back({t, RowKind::counterfactual, label, "observed", history(cf.t, static_cast<Eigen::Index>(ex[a]))});
    }
  }
  for (const auto& ef : run.effects) {
    const auto& t = time_label(times, ef.t);
    for (std::size_t a = 0; a < ex.size(); ++a) {
      const auto e = static_cast<Eigen::Index>(a);
      const auto& label = spec.graph.label(ex[a]);
      rows.push_back({t, RowKind::counterfactual, label, "effect_q05", ef.lower(e)});
      rows.push_back({t, RowKind::counterfactual, label, "effect_q50", ef.median(e)});
      rows.push_back({t, RowKind::counterfactual, label, "effect_q95", ef.upper(e)});
      rows.push_back({t, RowKind::counterfactual, label, "effect_mean", ef.mean(e)});
    }
  }
  return rows;
}

std::vector<StepRecordRow> path_rows(const ModelSpec& spec, const ForecastPaths& paths,
                                     const std::vector<std::string>& times) {
  std::vector<StepRecordRow> rows;
  const auto& t = time_label(times, paths.origin);
  for (std::size_t h = 0; h < paths.y.size(); ++h) {
    const auto& Y = paths.y[h];
    const std::string step = "h" + std::to_string(h + 1) + ":";
    for (Eigen::Index j = 0; j < Y.rows(); ++j) {
      std::vector<double> v(static_cast<std::size_t>(Y.cols()));
      for (Eigen::Index r = 0; r < Y.cols(); ++r) v[static_cast<std::size_t>(r)] = Y(j, r);
      const auto& label = spec.graph.label(static_cast<std::size_t>(j));
      for (int k = 0; k < 3; ++k)
        rows.push_back({t, RowKind::forecast, label, step + kQNames[k], numeric::quantile(v, kProbs[k])});
      rows.push_back({t, RowKind::forecast, label, step + "mean", Y.row(j).mean()});
    }
  }
  return rows;
}

std::vector<StepRecordRow> factor_rows(const ModelSpec& spec, const FactorSeries& fs,
                                       const std::vector<Matrix>& gammas, const std::vector<std::string>& times) {
  std::vector<StepRecordRow> rows;
  const auto p = fs.phi.rows();
  for (std::size_t i = 0; i < fs.times.size(); ++i) {
    const auto& t = time_label(times, fs.times[i]);
    const auto c = static_cast<Eigen::Index>(i);
    const auto& dec = fs.decompositions[i];
    for (Eigen::Index k = 0; k < p; ++k) {
      const std::string f = "f" + std::to_string(k + 1);
      rows.push_back({t, RowKind::factor, f, "phi", fs.phi(k, c)});
      rows.push_back({t, RowKind::factor, f, "d", fs.singular(k, c)});
    }
    for (std::size_t j = 0; j < spec.q(); ++j) {
      const auto r = static_cast<Eigen::Index>(j);
      const auto& label = spec.graph.label(j);
      for (Eigen::Index k = 0; k < p; ++k) {
        const std::string f = "f" + std::to_string(k + 1);
        rows.push_back({t, RowKind::factor, label, "L:" + f, dec.L(r, k)});
        rows.push_back({t, RowKind::factor, label, "F:" + f, dec.F(k, r)});
      }
      for (std::size_t h = 0; h < spec.q(); ++h)
        rows.push_back({t, RowKind::factor, label, "Gamma:" + spec.graph.label(h),
                        gammas[i](r, static_cast<Eigen::Index>(h))});
    }
  }
  if (!fs.times.empty()) {
    const auto& t = time_label(times, fs.times.back());
    for (Eigen::Index k = 0; k < p; ++k)
      rows.push_back({t, RowKind::factor, "f" + std::to_string(k + 1), "d_mean", fs.singular.row(k).mean()});
  }
  return rows;
}

std::vector<StepRecordRow> grid_rows(const std::vector<GridCurve>& curves, const std::vector<std::string>& times) {
  std::vector<StepRecordRow> rows;
  for (const auto& c : curves) {
    const std::string label =
        "delta=" + format_value(c.discount.delta_phi) + ";beta=" + format_value(c.discount.beta);
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      const auto& t = time_label(times, c.times[i]);
      const auto k = static_cast<Eigen::Index>(i);
      rows.push_back({t, RowKind::marglik, label, "log_pred", c.log_pred(k)});
      rows.push_back({t, RowKind::marglik, label, "cumulative", c.cumulative(k)});
      rows.push_back({t, RowKind::marglik, label, "relative", c.relative(k)});
    }
  }
  return rows;
}

}  // namespace sgdlm
