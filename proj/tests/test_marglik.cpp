#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

#include "sgdlm/marglik.hpp"

#include <cmath>

using namespace sgdlm;
using namespace testing_support;

TEST_CASE("single series predictive is the T log density") {
  auto spec = intercept_model(build_graph(1, {{}}), 10, 0.3, 0.5, 0.1, 6.0, 0.4);
  Vector y = Vector::Constant(1, 0.9);
  std::vector<Vector> x{Vector::Ones(1)};
  const double expect = one_step_forecast(spec.prior[0], x[0]).logpdf(0.9);
  CHECK(predictive_product_f(spec, spec.prior, x, y) == doctest::Approx(expect).epsilon(1e-14));
  auto rec = posterior_estimator(spec, spec.prior, x, y, 10, 1, 0);
  CHECK(rec.log_pred == expect);
  CHECK(rec.estimator_variance == 0.0);
}

TEST_CASE("estimators are exact without cycles") {
  auto empty = intercept_model(build_graph(3, {{}, {}, {}}), 10, 0.1, 0.5, 0.1, 6.0, 0.4);
  Vector y(3);
  y << 0.2, -0.1, 0.5;
  std::vector<Vector> x(3, Vector::Ones(1));
  const double f = predictive_product_f(empty, empty.prior, x, y);
  CHECK(posterior_estimator(empty, empty.prior, x, y, 1, 3, 0).log_pred ==
        posterior_estimator(empty, empty.prior, x, y, 100000, 4, 0).log_pred);
  CHECK(prior_estimator(empty, empty.prior, x, y, 7, 3, 0).log_pred == doctest::Approx(f).epsilon(1e-12));

  auto dag = intercept_model(build_graph(3, {{}, {0}, {0, 1}}), 10, 0.1, 0.5, 0.2, 6.0, 0.4);
  auto rec = posterior_estimator(dag, dag.prior, x, y, 500, 3, 0);
  CHECK(rec.log_g == 0.0);
  CHECK(rec.estimator_variance == 0.0);
  // the prior estimator is unbiased, not exact, on a DAG
  double acc = 0.0;
  const int reps = 40;
  std::vector<double> v;
  for (int i = 0; i < reps; ++i) v.push_back(std::exp(prior_estimator(dag, dag.prior, x, y, 2000, 100 + i, 0).log_pred));
  for (double e : v) acc += e;
  const double mean = acc / reps;
  double ss = 0.0;
  for (double e : v) ss += (e - mean) * (e - mean);
  const double se = std::sqrt(ss / (reps - 1) / reps);
  CHECK(std::abs(mean - std::exp(rec.log_pred)) < 4 * se + 1e-12);
}

TEST_CASE("two-cycle estimators against quadrature") {
  const auto p0 = scalar_gamma_prior(0.3, 0.2, 8.0, 0.5);
  const auto p1 = scalar_gamma_prior(-0.2, 0.3, 10.0, 0.8);
  auto spec = two_cycle_model(p0, p1, 1);
  Vector y(2);
  y << 1.1, -0.7;
  const std::vector<Vector> x{Vector(), Vector()};
  const double truth = two_cycle_quadrature(p0, p1, y(0), y(1)).density;
  auto post = posterior_estimator(spec, spec.prior, x, y, 100000, 11, 0);
  auto prior = prior_estimator(spec, spec.prior, x, y, 100000, 12, 0);
  CHECK(std::exp(post.log_pred) == doctest::Approx(truth).epsilon(0.01));
  CHECK(std::exp(prior.log_pred) == doctest::Approx(truth).epsilon(0.01));
  CHECK(post.estimator_variance < prior.estimator_variance);
  CHECK(post.log_g != 0.0);
}

TEST_CASE("monitor") {
  std::vector<MargLikRecord> a(4), b(4);
  for (int i = 0; i < 4; ++i) {
    a[i].t = b[i].t = 10 + i;
    a[i].log_pred = b[i].log_pred = -1.0 * i;
  }
  auto same = monitor(a, b);
  CHECK((same.probability.array() == 0.5).all());
  a[1].log_pred += 2.0;
  a[2].log_pred += 1.0;
  auto m = monitor(a, b);
  CHECK(m.probability(0) == 0.5);
  CHECK(m.probability(1) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  CHECK(m.probability(3) == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))));
  auto ex = monitor(a, b, {11});
  CHECK(ex.increment(1) == 0.0);
  CHECK(ex.probability(3) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK((m.probability(i) > 0.0 && m.probability(i) < 1.0));
  b[2].t = 99;
  CHECK_THROWS_AS(monitor(a, b), DimensionError);
  b.pop_back();
  CHECK_THROWS_AS(monitor(a, b), DimensionError);
}

TEST_CASE("discount grid") {
  auto grid = square_grid({0.9, 0.95, 0.98, 1.0});
  CHECK(grid.size() == 16);
  auto spec = intercept_model(build_graph(2, {{1}, {}}), 50, 0.0, 0.5, 0.1, 5.0, 0.1);
  Rng rng = make_rng(1, Stream::test, {});
  Matrix h(8, 2);
  for (Eigen::Index t = 0; t < 8; ++t) h.row(t) = 0.3 * draw_normal_vector(rng, 2).transpose();
  auto curves = discount_grid(spec, h, 4, grid, 15);
  REQUIRE(curves.size() == 16);
  CHECK(curves[15].relative.isZero(0.0));
  CHECK(curves[0].times.size() == 8);
  // on a DAG the curves are exact, so rerunning reproduces them
  auto again = discount_grid(spec, h, 9, {grid[3]}, 0);
  CHECK(again[0].cumulative == curves[3].cumulative);
  CHECK_THROWS_AS(discount_grid(spec, h, 4, grid, 16), ConfigError);
}
