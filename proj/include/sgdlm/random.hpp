#pragma once

#include "sgdlm/common.hpp"

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace sgdlm {

// Named substreams. Each consumer of randomness draws from its own stream so
// that enabling one feature (e.g. marginal likelihoods) never perturbs another.
enum class Stream : std::uint64_t {
  is_draws = 1,
  marglik = 2,
  forecast = 3,
  cfm_ensemble = 4,
  cfm_mixture = 5,
  cfm_update = 6,
  effects = 7,
  simulate = 8,
  ng_sample = 9,
  prior_marglik = 10,
  test = 99,
};

/// SplitMix64 finaliser; used to derive independent seeds from a key.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = mix64(master ^ mix64(static_cast<std::uint64_t>(stream)));
  for (auto k : key) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, Stream stream,
                    std::initializer_list<std::uint64_t> key = {}) {
  return Rng(derive_seed(master, stream, key));
}

inline double draw_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline Vector draw_normal_vector(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = dist(rng);
  return z;
}

/// Gamma(shape, rate) draw.
inline double draw_gamma(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

inline double draw_beta(Rng& rng, double a, double b) {
  const double x = draw_gamma(rng, a, 1.0);
  const double y = draw_gamma(rng, b, 1.0);
  return x / (x + y);
}

inline double draw_uniform(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

/// Multinomial selection of `count` indices with probabilities `probs`
/// (assumed normalised). Inverse-CDF on sorted uniforms, so the result is
/// sorted by component index.
inline IndexList multinomial_indices(Rng& rng, const Vector& probs, std::size_t count) {
  std::vector<double> u(count);
  for (auto& v : u) v = draw_uniform(rng);
  std::sort(u.begin(), u.end());
  IndexList out(count);
  double cum = probs.size() > 0 ? probs(0) : 0.0;
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < count; ++i) {
    while (u[i] >= cum && k + 1 < probs.size()) {
      ++k;
      cum += probs(k);
    }
    out[i] = static_cast<std::size_t>(k);
  }
  return out;
}

/// Same as multinomial_indices but returned in a random order, for pairing
/// two independently resampled ensembles.
inline IndexList resample_shuffled(Rng& rng, const Vector& probs, std::size_t count) {
  IndexList idx = multinomial_indices(rng, probs, count);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace sgdlm
