#pragma once

#include "sgdlm/counterfactual.hpp"
#include "sgdlm/engine.hpp"
#include "sgdlm/random.hpp"
#include "sgdlm/structure.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace testing_support {

using namespace sgdlm;

inline std::string data_path(const std::string& name) { return std::string(SGDLM_DATA_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline GraphStructure gdp_graph() { return graph_from_json_text(slurp(data_path("gdp_graph.json"))); }

/// Random directed graph: each ordered pair (j, h), j != h, is an edge with
/// probability `p`.
inline GraphStructure random_graph(Rng& rng, std::size_t q, double p) {
  std::vector<IndexList> lists(q);
  for (std::size_t j = 0; j < q; ++j)
    for (std::size_t h = 0; h < q; ++h)
      if (h != j && draw_uniform(rng) < p) lists[j].push_back(h);
  return build_graph(q, std::move(lists));
}

/// Random graph whose edges only join the two halves of a bipartition, so
/// every directed cycle has even order.
inline GraphStructure random_bipartite_graph(Rng& rng, std::size_t q, double p) {
  std::vector<IndexList> lists(q);
  for (std::size_t j = 0; j < q; ++j)
    for (std::size_t h = 0; h < q; ++h)
      if ((h % 2) != (j % 2) && draw_uniform(rng) < p) lists[j].push_back(h);
  return build_graph(q, std::move(lists));
}

/// Random graph with edges only from lower to higher index parents, so
/// acyclic.
inline GraphStructure random_dag(Rng& rng, std::size_t q, double p) {
  std::vector<IndexList> lists(q);
  for (std::size_t j = 0; j < q; ++j)
    for (std::size_t h = 0; h < j; ++h)
      if (draw_uniform(rng) < p) lists[j].push_back(h);
  return build_graph(q, std::move(lists));
}

/// Continuous random fill of the graph pattern, entries in +-[0.1, 1] * scale.
inline Matrix random_fill(const GraphStructure& g, Rng& rng, double scale = 1.0) {
  const auto q = static_cast<Eigen::Index>(g.q());
  Matrix gamma = Matrix::Zero(q, q);
  for (std::size_t j = 0; j < g.q(); ++j)
    for (auto h : g.parents(j)) {
      const double mag = 0.1 + 0.9 * draw_uniform(rng);
      gamma(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(h)) =
          scale * (draw_uniform(rng) < 0.5 ? -mag : mag);
    }
  return gamma;
}

inline NGPosterior random_ng(Rng& rng, Eigen::Index d, std::size_t n_phi) {
  NGPosterior ng;
  ng.m = draw_normal_vector(rng, d);
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = draw_normal(rng);
  ng.M = a * a.transpose() / static_cast<double>(d) + 0.1 * Matrix::Identity(d, d);
  ng.n = 2.0 + 10.0 * draw_uniform(rng);
  ng.s = 0.2 + draw_uniform(rng);
  ng.n_phi = n_phi;
  return ng;
}

/// Intercept-only model on `g` with a shared diagonal prior.
inline ModelSpec intercept_model(const GraphStructure& g, std::size_t R, double m0 = 0.0, double v_phi = 1.0,
                                 double v_gamma = 0.1, double n = 5.0, double s = 1.0, double delta = 1.0,
                                 double beta = 1.0) {
  ModelSpec spec;
  spec.graph = g;
  spec.R = R;
  for (std::size_t j = 0; j < g.q(); ++j) {
    spec.design.push_back({true, {}});
    spec.discount.push_back({delta, delta, beta});
    const auto d = static_cast<Eigen::Index>(1 + g.parents(j).size());
    NGPosterior p;
    p.m = Vector::Zero(d);
    p.m(0) = m0;
    p.M = Matrix::Identity(d, d) * v_gamma;
    p.M(0, 0) = v_phi;
    p.n = n;
    p.s = s;
    p.n_phi = 1;
    spec.prior.push_back(p);
  }
  return spec;
}

/// Ensemble of R draws cycling through the given parameter atoms.
inline ParameterEnsemble atoms(const std::vector<std::vector<Vector>>& theta, const std::vector<Vector>& lambda,
                               std::size_t R) {
  ParameterEnsemble e;
  const auto q = theta.front().size();
  e.theta.resize(q);
  e.lambda.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(R));
  for (std::size_t j = 0; j < q; ++j) e.theta[j].resize(theta.front()[j].size(), static_cast<Eigen::Index>(R));
  for (std::size_t r = 0; r < R; ++r) {
    const auto& a = theta[r % theta.size()];
    for (std::size_t j = 0; j < q; ++j) e.theta[j].col(static_cast<Eigen::Index>(r)) = a[j];
    e.lambda.col(static_cast<Eigen::Index>(r)) = lambda[r % lambda.size()];
  }
  return e;
}

}  // namespace testing_support
