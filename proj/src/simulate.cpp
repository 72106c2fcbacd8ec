#include "sgdlm/simulate.hpp"

#include <cmath>

namespace sgdlm {

TruthSchedule constant_truth(TrueParameters p) {
  return [p = std::move(p)](Eigen::Index) { return p; };
}

Simulation simulate(const ModelSpec& spec, const TruthSchedule& truth, const Matrix& initial, std::size_t horizon,
                    std::uint64_t seed) {
  spec.validate();
  const auto q = static_cast<Eigen::Index>(spec.q());
  const auto n_phi = spec.n_phi();
  if (initial.cols() != q && initial.rows() > 0)
    throw DimensionError("simulate: initial rows have " + std::to_string(initial.cols()) + " columns, expected " +
                         std::to_string(q));
  if (static_cast<std::size_t>(initial.rows()) < spec.max_lag())
    throw DimensionError("simulate: need " + std::to_string(spec.max_lag()) + " initial rows for the lags");

  Simulation sim;
  sim.first = initial.rows();
  const auto H = static_cast<Eigen::Index>(horizon);
  sim.y.resize(sim.first + H, q);
  if (sim.first > 0) sim.y.topRows(sim.first) = initial;
  sim.mu.resize(H, q);
  sim.alpha.resize(H, q);
  sim.lambda.resize(H, q);

  for (Eigen::Index h = 0; h < H; ++h) {
    const Eigen::Index t = sim.first + h;
    const auto p = truth(t);
    if (p.theta.size() != spec.q() || p.lambda.size() != q)
      throw DimensionError("simulate: truth at row " + std::to_string(t) + " has the wrong shape");
    for (std::size_t j = 0; j < spec.q(); ++j)
      if (static_cast<std::size_t>(p.theta[j].size()) != n_phi[j] + spec.graph.parents(j).size())
        throw DimensionError("simulate: true state of series " + std::to_string(j) + " has the wrong length");
    if ((p.lambda.array() <= 0.0).any()) throw ConfigError("simulate: precisions must be positive");

    const Matrix gamma = assemble_gamma(spec.graph, p.theta, n_phi);
    const double rho = eigen_diagnostics(spec.graph, gamma).spectral_radius;
    if (!(rho < 1.0))
      throw ConfigError("simulate: true Gamma at row " + std::to_string(t) + " has spectral radius " +
                        std::to_string(rho) + " (must be < 1)");
    const auto x = exogenous_regressors(spec, sim.y, t);
    const Vector mu = assemble_mu(p.theta, x);
    const auto joint = joint_moments(gamma, mu, p.lambda);

    Rng rng = make_rng(seed, Stream::simulate, {static_cast<std::uint64_t>(t)});
    Vector nu(q);
    for (Eigen::Index j = 0; j < q; ++j) nu(j) = draw_normal(rng) / std::sqrt(p.lambda(j));
    // y = (I - Gamma)^{-1} (mu + nu)
    const Matrix A = Matrix::Identity(q, q) - gamma;
    sim.y.row(t) = A.partialPivLu().solve(mu + nu).transpose();
    sim.gamma.push_back(gamma);
    sim.mu.row(h) = mu.transpose();
    sim.alpha.row(h) = joint.alpha.transpose();
    sim.lambda.row(h) = p.lambda.transpose();
  }
  return sim;
}

}  // namespace sgdlm
