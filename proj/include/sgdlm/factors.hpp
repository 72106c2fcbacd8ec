#pragma once

// Sparse factor structure implied by a coefficient matrix: gamma = L D F,
// with the SVD taken block by block over common parental sets so that every
// score row lives on one set P_h and every loadings column on ch(P_h).

#include "sgdlm/common.hpp"
#include "sgdlm/engine.hpp"
#include "sgdlm/structure.hpp"

#include <optional>
#include <vector>

namespace sgdlm {

struct FactorDecomposition {
  Matrix L;  // q x p, orthonormal columns
  Vector D;  // p, positive
  Matrix F;  // p x q, orthonormal rows
  std::size_t p = 0;
  IndexList set_assignment;     // factor -> index into the partition
  BoolMatrix reference_pattern; // p x q score pattern used for matching
};

inline constexpr double kFactorZeroTol = 1e-10;

/// Factorizes gamma. Factors come out sorted by singular value (largest
/// first). Throws StructuralError if gamma has entries outside the blocks of
/// `part` and NumericalError if a score row straddles two sets.
FactorDecomposition svd_factorize(const Matrix& gamma, const ParentalPartition& part);

/// Score pattern with row i supported on the members of set_assignment[i].
BoolMatrix score_pattern(const ParentalPartition& part, const IndexList& set_assignment, std::size_t q);

/// Matches factors to the rows of `reference`, makes the largest entry of
/// each score row positive, then orders factors sharing a pattern by
/// descending magnitude of that pivot entry.
FactorDecomposition canonicalize(const FactorDecomposition& dec, const BoolMatrix& reference);

struct FactorSeries {
  std::vector<Eigen::Index> times;
  Matrix phi;       // p x T, phi_t = D_t F_t y_t
  Matrix singular;  // p x T
  std::vector<FactorDecomposition> decompositions;
  BoolMatrix reference;
};

/// Factor trajectories from per-time gamma estimates. `y` has one row per
/// entry of `gammas`. Without a reference, the pattern of the decomposition
/// at `reference_index` (in singular value order) is used for every time.
FactorSeries factor_series(const std::vector<Matrix>& gammas, const std::vector<Eigen::Index>& times,
                           const Matrix& y, const ParentalPartition& part,
                           const std::optional<BoolMatrix>& reference = std::nullopt,
                           std::size_t reference_index = 0);

struct FactorCovariances {
  Matrix v_phi;   // p x p: D F Omega^{-1} F' D
  Matrix c_phi_nu;// p x q: D F (I - Gamma)^{-1} Lambda^{-1}
};

FactorCovariances factor_covariances(const FactorDecomposition& dec, const JointMoments& joint);

}  // namespace sgdlm
