#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

#include "sgdlm/engine.hpp"
#include "sgdlm/numeric.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include <omp.h>

#include <algorithm>
#include <cmath>

using namespace sgdlm;
using namespace testing_support;

namespace {

Matrix random_history(std::uint64_t seed, Eigen::Index T, Eigen::Index q) {
  Rng rng = make_rng(seed, Stream::test, {11});
  Matrix h(T, q);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index j = 0; j < q; ++j) h(t, j) = 0.2 * draw_normal(rng) + 0.1 * j;
  return h;
}

double ks_against_t(std::vector<double> v, double loc, double scale_q, double dof) {
  std::sort(v.begin(), v.end());
  boost::math::students_t dist(dof);
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double F = boost::math::cdf(dist, (v[i] - loc) / std::sqrt(scale_q));
    d = std::max({d, std::abs(F - i / n), std::abs(F - (i + 1) / n)});
  }
  return d;
}

}  // namespace

TEST_CASE("assemble_gamma places parental coefficients") {
  auto empty = build_graph(3, {{}, {}, {}});
  std::vector<Vector> th(3, Vector::Ones(1));
  CHECK(assemble_gamma(empty, th, {1, 1, 1}).isZero(0.0));

  auto g = build_graph(2, {{1}, {}});
  std::vector<Vector> th2{Vector::Constant(1, 0.5), Vector()};
  Matrix expect(2, 2);
  expect << 0, 0.5, 0, 0;
  CHECK(assemble_gamma(g, th2, {0, 0}) == expect);
  CHECK_THROWS_AS(assemble_gamma(g, th2, {1, 0}), DimensionError);

  auto gdp = gdp_graph();
  Rng rng = make_rng(1, Stream::test, {});
  std::vector<Vector> thg;
  for (std::size_t j = 0; j < gdp.q(); ++j)
    thg.push_back(draw_normal_vector(rng, static_cast<Eigen::Index>(3 + gdp.parents(j).size())));
  const Matrix G = assemble_gamma(gdp, thg, std::vector<std::size_t>(gdp.q(), 3));
  int zero_cols = 0;
  for (Eigen::Index c = 0; c < G.cols(); ++c) zero_cols += G.col(c).isZero(0.0) ? 1 : 0;
  CHECK(zero_cols == 7);
  CHECK(G.diagonal().isZero(0.0));
}

TEST_CASE("joint moments") {
  SUBCASE("zero gamma") {
    Vector mu(2), lam(2);
    mu << 1, 2;
    lam << 3, 4;
    auto jm = joint_moments(Matrix::Zero(2, 2), mu, lam);
    CHECK(jm.alpha == mu);
    CHECK(jm.omega == Matrix(lam.asDiagonal()));
  }
  SUBCASE("hand example") {
    Matrix g = Matrix::Zero(2, 2);
    g(0, 1) = 0.5;
    Vector mu(2);
    mu << 1, 2;
    auto jm = joint_moments(g, mu, Vector::Ones(2));
    CHECK(jm.alpha(0) == doctest::Approx(2.0));
    CHECK(jm.alpha(1) == doctest::Approx(2.0));
    Matrix om(2, 2);
    om << 1, -0.5, -0.5, 1.25;
    CHECK((jm.omega - om).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("Neumann series and covariance reconstruction") {
    Rng rng = make_rng(2, Stream::test, {});
    for (int rep = 0; rep < 10; ++rep) {
      auto g = random_graph(rng, 8, 0.3);
      Matrix gam = random_fill(g, rng, 0.3);
      // keep the spectral radius below one so the series converges
      auto diag = eigen_diagnostics(g, gam);
      if (diag.spectral_radius >= 0.9) gam *= 0.5 / diag.spectral_radius;
      Vector mu = draw_normal_vector(rng, 8);
      Vector lam = (draw_normal_vector(rng, 8).array().abs() + 0.2).matrix();
      auto jm = joint_moments(gam, mu, lam);
      Vector acc = Vector::Zero(8), term = mu;
      for (int k = 0; k < 200; ++k) {
        acc += term;
        term = gam * term;
      }
      CHECK((acc - jm.alpha).cwiseAbs().maxCoeff() < 1e-8);
      const Matrix A = Matrix::Identity(8, 8) - gam;
      const Matrix sigma = jm.omega.inverse();
      CHECK((A * sigma * A.transpose() - Matrix(lam.cwiseInverse().asDiagonal())).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("singular system") {
    Matrix g = Matrix::Zero(2, 2);
    g(0, 1) = 1.0;
    g(1, 0) = 1.0;
    CHECK_THROWS_AS(joint_moments(g, Vector::Zero(2), Vector::Ones(2)), DegeneracyError);
  }
}

TEST_CASE("importance weights on graphs without cycles are uniform") {
  for (auto g : {build_graph(3, {{}, {}, {}}), build_graph(3, {{}, {0}, {0, 1}})}) {
    auto spec = intercept_model(g, 1000);
    Matrix h = random_history(3, 2, 3);
    auto x = exogenous_regressors(spec, h, 0);
    auto s = is_update(spec, spec.prior, x, h.row(0).transpose(), 9, 0);
    CHECK(s.ess_fraction == 1.0);
    CHECK((s.weights.array() == 1.0 / 1000).all());
    CHECK(std::abs(s.weights.sum() - 1.0) < 1e-12);
    for (bool e : s.exact) CHECK(e);
  }
}

TEST_CASE("weights normalise and collapse is detected") {
  SampleSet s;
  s.log_det = Vector::Zero(100);
  s.log_det(3) = 50.0;
  CHECK_THROWS_AS(finalize_weights(s, true), DegeneracyError);
  s.log_det(3) = 0.3;
  finalize_weights(s, true);
  CHECK(std::abs(s.weights.sum() - 1.0) < 1e-12);
  CHECK(s.ess_fraction > 0.9);
}

TEST_CASE("dof solve") {
  const double c = boost::math::digamma(3.0) - std::log(3.0);
  CHECK(vb_dof_solve(c, 1.0) == doctest::Approx(6.0).epsilon(1e-10));
  CHECK(vb_dof_solve(c, 5e5) == doctest::Approx(6.0).epsilon(1e-10));
  // analytic inputs E[lambda] = 2, E[log lambda] = digamma(3) - log(1.5)
  const double s = 1.0 / 2.0;
  CHECK(vb_dof_solve(boost::math::digamma(3.0) - std::log(1.5) + std::log(s), 4.0) ==
        doctest::Approx(6.0).epsilon(1e-10));
  CHECK(vb_dof_solve(-1e-9, 10.0) == 1e6);
  CHECK(vb_dof_solve(-1e4, 10.0) == 1e-3);
  for (double n : {0.01, 0.5, 3.0, 40.0, 2000.0, 5e5}) {
    const double cc = boost::math::digamma(n / 2) - std::log(n / 2);
    CHECK(vb_dof_solve(cc, 5.0) == doctest::Approx(n).epsilon(1e-8));
  }
}

TEST_CASE("VB moment matching") {
  SUBCASE("two-atom hand example") {
    SampleSet s;
    s.theta = {Matrix(1, 2)};
    s.theta[0] << 0.0, 2.0;
    s.lambda = Matrix(1, 2);
    s.lambda << 1.0, 3.0;
    s.weights = Vector::Constant(2, 0.5);
    s.ess_fraction = 1.0;
    s.naive = {scalar_gamma_prior(0, 1, 5, 1)};
    s.exact = {false};
    auto out = vb_decouple(s, {5.0}, Exec::serial);
    CHECK(out[0].m(0) == doctest::Approx(1.5));
    CHECK(out[0].s == doctest::Approx(0.5));
    // E[lambda (theta - m)^2] / E[lambda] = (0.5*1*2.25 + 0.5*3*0.25) / 2
    CHECK(out[0].M(0, 0) == doctest::Approx(0.75));
  }
  SUBCASE("recovers the generating NG from its own sample") {
    Rng rng = make_rng(5, Stream::test, {});
    SampleSet s;
    const std::size_t R = 20000;
    auto ng = random_ng(rng, 3, 1);
    ng.n = 12.0;
    s.naive = {ng};
    s.exact = {false};
    kernels::serial::draw_ng_batch(s.naive, R, 17, Stream::test, 0, s.theta, s.lambda);
    s.weights = Vector::Constant(R, 1.0 / R);
    s.ess_fraction = 1.0;
    auto out = vb_decouple(s, {ng.n}, Exec::serial)[0];
    // standard errors from the generating distribution
    const double se_s = ng.s * std::sqrt(2.0 / ng.n / R);
    CHECK(std::abs(out.s - ng.s) < 4 * se_s);
    for (Eigen::Index i = 0; i < 3; ++i) {
      const double se_m = std::sqrt(ng.M(i, i) / R);
      CHECK(std::abs(out.m(i) - ng.m(i)) < 4 * se_m);
      CHECK(out.M(i, i) == doctest::Approx(ng.M(i, i)).epsilon(0.05));
    }
    CHECK(out.n == doctest::Approx(ng.n).epsilon(0.1));
  }
  SUBCASE("needs at least two effective draws") {
    SampleSet s;
    s.theta = {Matrix::Zero(1, 1)};
    s.lambda = Matrix::Ones(1, 1);
    s.weights = Vector::Ones(1);
    s.naive = {scalar_gamma_prior(0, 1, 5, 1)};
    s.exact = {false};
    CHECK_THROWS_AS(vb_decouple(s, {5.0}, Exec::serial), DegeneracyError);
    s.exact = {true};
    CHECK(vb_decouple(s, {5.0}, Exec::serial)[0].m == s.naive[0].m);
  }
}

TEST_CASE("empty graph filter equals direct conjugate updating") {
  auto g = build_graph(3, {{}, {}, {}});
  auto spec = intercept_model(g, 50, 0.1, 1.0, 0.1, 4.0, 0.5, 0.95, 0.9);
  spec.design[1].lags = {{0, 1}};
  spec.prior[1].m = Vector::Zero(2);
  spec.prior[1].M = Matrix::Identity(2, 2);
  spec.prior[1].n_phi = 2;
  Matrix h = random_history(4, 12, 3);
  auto res = run_filter(spec, h, 99);
  REQUIRE(res.records.size() == 11);
  std::vector<NGPosterior> st = spec.prior;
  for (Eigen::Index t = 1; t < 12; ++t) {
    for (std::size_t j = 0; j < 3; ++j) {
      Vector F = j == 1 ? Vector(Vector::Ones(2)) : Vector(Vector::Ones(1));
      if (j == 1) F(1) = h(t - 1, 0);
      const auto post = conjugate_update(st[j], F, h(t, static_cast<Eigen::Index>(j)));
      const auto& got = res.records[static_cast<std::size_t>(t - 1)].posterior[j];
      CHECK(got.m == post.m);
      CHECK(got.M == post.M);
      CHECK(got.n == post.n);
      CHECK(got.s == post.s);
      st[j] = evolve(post, Matrix(), spec.discount[j]);
    }
    CHECK(res.records[static_cast<std::size_t>(t - 1)].ess_fraction == 1.0);
  }
}

TEST_CASE("filter is deterministic and execution-policy independent") {
  omp_set_num_threads(3);
  Rng rng = make_rng(8, Stream::test, {});
  auto g = build_graph(4, {{1}, {0, 2}, {3}, {1}});
  auto spec = intercept_model(g, 400, 0.0, 1.0, 0.05, 6.0, 0.04, 0.95, 0.95);
  Matrix h = random_history(6, 10, 4);
  RunOptions opt;
  opt.marglik = true;
  spec.exec = Exec::serial;
  auto a = run_filter(spec, h, 5, opt);
  spec.exec = Exec::parallel;
  auto b = run_filter(spec, h, 5, opt);
  auto c = run_filter(spec, h, 5, opt);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& ra = a.records[i];
    const auto& rb = b.records[i];
    CHECK(ra.ess_fraction == rb.ess_fraction);
    CHECK(ra.gamma_mean == rb.gamma_mean);
    CHECK(ra.marglik->log_pred == rb.marglik->log_pred);
    CHECK(rb.marglik->log_pred == c.records[i].marglik->log_pred);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(ra.posterior[j].m == rb.posterior[j].m);
      CHECK(ra.posterior[j].M == rb.posterior[j].M);
      CHECK(ra.posterior[j].n == rb.posterior[j].n);
    }
  }
  // turning on marginal likelihoods does not move the filter
  opt.marglik = false;
  auto d = run_filter(spec, h, 5, opt);
  CHECK(d.records.back().posterior[1].m == b.records.back().posterior[1].m);
}

TEST_CASE("OAM-style discount override applies to one evolution only") {
  auto g = build_graph(2, {{}, {}});
  auto spec = intercept_model(g, 10, 0.0, 1.0, 0.1, 5.0, 1.0, 0.95, 0.95);
  Matrix h = random_history(2, 6, 2);
  RunOptions opt;
  opt.discount_into[3] = {{0.5, 0.5, 0.95}, {0.95, 0.95, 0.95}};
  auto res = run_filter(spec, h, 1, opt);
  CHECK(res.records[2].discount_used[0].delta_phi == 0.5);
  CHECK(res.records[2].discount_used[1].delta_phi == 0.95);
  CHECK(res.records[3].discount_used[0].delta_phi == 0.95);
  CHECK(res.records[1].discount_used[0].delta_phi == 0.95);
}

TEST_CASE("recoupled posterior mean on a two-series cycle") {
  const auto p0 = scalar_gamma_prior(0.3, 0.2, 8.0, 0.5);
  const auto p1 = scalar_gamma_prior(-0.2, 0.3, 10.0, 0.8);
  const double y0 = 1.1, y1 = -0.7;
  auto spec = two_cycle_model(p0, p1, 40000);
  Vector y(2);
  y << y0, y1;
  auto s = is_update(spec, spec.prior, {Vector(), Vector()}, y, 2024, 0);
  const double e01 = s.theta[0].row(0).dot(s.weights);
  const double e10 = s.theta[1].row(0).dot(s.weights);
  auto q = two_cycle_quadrature(p0, p1, y0, y1);
  CHECK(e01 == doctest::Approx(q.mean01).epsilon(0.03));
  CHECK(e10 == doctest::Approx(q.mean10).epsilon(0.03));
  CHECK(s.ess_fraction < 1.0);
  CHECK(s.ess_fraction > 0.5);
}

TEST_CASE("one-step simulated forecast matches the analytic T") {
  auto g = build_graph(2, {{}, {}});
  auto spec = intercept_model(g, 2000, 0.2, 0.3, 0.1, 7.0, 0.6);
  Matrix h = random_history(9, 4, 2);
  auto res = run_filter(spec, h, 3);
  const auto& post = res.records.back().posterior;
  auto paths = forecast_k(spec, res.last_sample, post, h, 1, 10000, 77);
  CHECK(paths.resampled == 0);
  for (std::size_t j = 0; j < 2; ++j) {
    auto f = one_step_forecast(post[j], Vector::Ones(1));
    std::vector<double> v(paths.y[0].cols());
    for (Eigen::Index r = 0; r < paths.y[0].cols(); ++r) v[r] = paths.y[0](static_cast<Eigen::Index>(j), r);
    CHECK(ks_against_t(v, f.location, f.scale_q, f.dof) < 0.02);
  }
}

TEST_CASE("forecast mean and variance growth in a static model") {
  auto g = build_graph(1, {{}});
  auto spec = intercept_model(g, 2000, 0.4, 0.05, 0.1, 30.0, 0.01, 0.9, 1.0);
  Matrix h = Matrix::Constant(3, 1, 0.4);
  auto res = run_filter(spec, h, 3);
  const auto& post = res.records.back().posterior;
  auto paths = forecast_k(spec, res.last_sample, post, h, 6, 20000, 78);
  double prev = 0.0;
  for (std::size_t k = 0; k < 6; ++k) {
    const auto row = paths.y[k].row(0);
    const double mean = row.mean();
    const double var = (row.array() - mean).square().mean();
    CHECK(mean == doctest::Approx(post[0].m(0)).epsilon(0.02));
    // closed-form: m stays put, M grows by 1/delta each step
    const double M = post[0].M(0, 0) / std::pow(0.9, static_cast<double>(k + 1));
    const double analytic = (M + post[0].s) * post[0].n / (post[0].n - 2.0);
    CHECK(var == doctest::Approx(analytic).epsilon(0.06));
    CHECK(var > prev * 0.98);
    prev = var;
  }
  CHECK_THROWS_AS(forecast_k(spec, res.last_sample, post, h, 0, 10, 1), ConfigError);
}

TEST_CASE("forecast paths are execution-policy independent") {
  omp_set_num_threads(4);
  auto g = build_graph(3, {{1}, {2}, {0}});
  auto spec = intercept_model(g, 500, 0.0, 1.0, 0.05, 6.0, 0.1, 0.95, 0.95);
  spec.design[0].lags = {{2, 1}};
  spec.prior[0] = intercept_model(build_graph(1, {{}}), 1).prior[0];
  spec.prior[0].m = Vector::Zero(3);
  spec.prior[0].M = Matrix::Identity(3, 3) * 0.1;
  spec.prior[0].n_phi = 2;
  Matrix h = random_history(12, 8, 3);
  auto res = run_filter(spec, h, 4);
  spec.exec = Exec::serial;
  auto a = forecast_k(spec, res.last_sample, res.records.back().posterior, h, 3, 300, 5);
  spec.exec = Exec::parallel;
  auto b = forecast_k(spec, res.last_sample, res.records.back().posterior, h, 3, 300, 5);
  for (std::size_t k = 0; k < 3; ++k) CHECK(a.y[k] == b.y[k]);
}

TEST_CASE("model validation") {
  auto g = build_graph(2, {{1}, {}});
  auto spec = intercept_model(g, 10);
  CHECK_NOTHROW(spec.validate());
  auto bad = spec;
  bad.prior[0].m = Vector::Zero(1);
  bad.prior[0].M = Matrix::Identity(1, 1);
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  bad = spec;
  bad.discount[1].beta = 1.2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.design[0].lags = {{5, 1}};
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  Matrix h = random_history(1, 4, 3);
  CHECK_THROWS_AS(run_filter(spec, h, 1), DimensionError);
}
