#pragma once

// Brute-force references for the two-series cycle y0 <- y1, y1 <- y0 with no
// exogenous regressors. Each series has an NG prior on its single parental
// coefficient; the structural residual r_j = y_j - gamma_j y_k and gamma_j
// are then jointly bivariate T with location (0, m), scale diag(s, M).

#include "sgdlm/engine.hpp"
#include "sgdlm/numeric.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

namespace testing_support {

using namespace sgdlm;

struct TwoCycleQuadrature {
  double density = 0.0;  // p(y0, y1)
  double mean01 = 0.0;   // E[gamma_01 | y]
  double mean10 = 0.0;   // E[gamma_10 | y]
};

inline double bivariate_t_logpdf(double r, double g, const NGPosterior& p) {
  Vector x(2), loc(2);
  x << r, g;
  loc << 0.0, p.m(0);
  Matrix sc = Matrix::Zero(2, 2);
  sc(0, 0) = p.s;
  sc(1, 1) = p.M(0, 0);
  return numeric::mvt_logpdf(x, loc, sc, p.n);
}

inline TwoCycleQuadrature two_cycle_quadrature(const NGPosterior& p0, const NGPosterior& p1, double y0, double y1,
                                               int nodes = 2001, double width = 40.0) {
  const double sd0 = std::sqrt(p0.M(0, 0));
  const double sd1 = std::sqrt(p1.M(0, 0));
  // Posterior scale shrinks around the data; centre the grid on the prior
  // and make it wide enough to hold both.
  const double lo0 = p0.m(0) - width * sd0, h0 = 2 * width * sd0 / (nodes - 1);
  const double lo1 = p1.m(0) - width * sd1, h1 = 2 * width * sd1 / (nodes - 1);
  std::vector<double> f0(nodes), g0(nodes), f1(nodes), g1(nodes);
  for (int i = 0; i < nodes; ++i) {
    g0[i] = lo0 + i * h0;
    g1[i] = lo1 + i * h1;
    f0[i] = std::exp(bivariate_t_logpdf(y0 - g0[i] * y1, g0[i], p0));
    f1[i] = std::exp(bivariate_t_logpdf(y1 - g1[i] * y0, g1[i], p1));
  }
  double z = 0.0, a = 0.0, b = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double wi = (i == 0 || i == nodes - 1) ? 0.5 : 1.0;
    for (int k = 0; k < nodes; ++k) {
      const double wk = (k == 0 || k == nodes - 1) ? 0.5 : 1.0;
      const double v = wi * wk * std::abs(1.0 - g0[i] * g1[k]) * f0[i] * f1[k];
      z += v;
      a += v * g0[i];
      b += v * g1[k];
    }
  }
  return {z * h0 * h1, a / z, b / z};
}

/// Intercept-free two-cycle model with scalar priors.
inline ModelSpec two_cycle_model(const NGPosterior& p0, const NGPosterior& p1, std::size_t R) {
  ModelSpec spec;
  spec.graph = build_graph(2, {{1}, {0}});
  spec.design = {{false, {}}, {false, {}}};
  spec.discount = {{1, 1, 1}, {1, 1, 1}};
  spec.prior = {p0, p1};
  spec.R = R;
  return spec;
}

inline NGPosterior scalar_gamma_prior(double m, double M, double n, double s) {
  NGPosterior p;
  p.m = Vector::Constant(1, m);
  p.M = Matrix::Constant(1, 1, M);
  p.n = n;
  p.s = s;
  p.n_phi = 0;
  return p;
}

/// Posterior moments of a scalar NG model after observing y = F theta + e,
/// by nested Gauss-Kronrod over (theta, u = log lambda) of prior times
/// likelihood. `centre` only places the theta window; the window half-width
/// scales with the prior conditional sd at each lambda so the T tails are
/// covered.
struct NGQuadrature {
  double e_theta = 0.0;
  double e_lambda = 0.0;
  double e_log_lambda = 0.0;
  double e_lambda_dev2 = 0.0;  // E[lambda (theta - centre)^2]
  double e_dev2 = 0.0;         // E[(theta - centre)^2]
};

inline NGQuadrature ng_posterior_quadrature(const NGPosterior& prior, double F, double y, double centre) {
  using boost::math::quadrature::gauss_kronrod;
  const double m0 = prior.m(0), M0 = prior.M(0, 0), a = 0.5 * prior.n, b = 0.5 * prior.n * prior.s;
  auto log_joint = [&](double th, double u) {
    const double lam = std::exp(u);
    const double lp_lam = a * std::log(b) - std::lgamma(a) + a * u - b * lam;  // includes the log-scale jacobian
    const double v = M0 / (prior.s * lam);
    const double lp_th = -0.5 * std::log(2 * std::numbers::pi * v) - 0.5 * (th - m0) * (th - m0) / v;
    const double r = y - F * th;
    return lp_lam + lp_th + 0.5 * u - 0.5 * std::log(2 * std::numbers::pi) - 0.5 * lam * r * r;
  };
  const double u0 = -std::log(prior.s);
  const double c = log_joint(centre, u0);
  auto moment = [&](auto g) {
    return gauss_kronrod<double, 31>::integrate(
        [&](double u) {
          const double half = 60.0 * std::sqrt(M0 / (prior.s * std::exp(u)));
          return gauss_kronrod<double, 31>::integrate(
              [&](double th) { return g(th, u) * std::exp(log_joint(th, u) - c); }, centre - half, centre + half, 10,
              1e-10);
        },
        u0 - 30.0, u0 + 8.0, 10, 1e-10);
  };
  const double z = moment([](double, double) { return 1.0; });
  NGQuadrature q;
  q.e_theta = moment([](double th, double) { return th; }) / z;
  q.e_lambda = moment([](double, double u) { return std::exp(u); }) / z;
  q.e_log_lambda = moment([](double, double u) { return u; }) / z;
  q.e_lambda_dev2 = moment([&](double th, double u) { return std::exp(u) * (th - centre) * (th - centre); }) / z;
  q.e_dev2 = moment([&](double th, double) { return (th - centre) * (th - centre); }) / z;
  return q;
}

}  // namespace testing_support
