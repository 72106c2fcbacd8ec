#pragma once

// Simultaneous parental graph and purely structural quantities derived from
// it: child sets, common parental sets, the moralised precision pattern,
// structural rank and eigen/cycle diagnostics of a coefficient matrix.

#include "sgdlm/common.hpp"

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace sgdlm {

/// Directed graph of simultaneous parents. `parents[j]` lists sp(j) in the
/// order its coefficients appear in series j's state vector.
class GraphStructure {
 public:
  GraphStructure() = default;

  std::size_t q() const { return parents_.size(); }
  const IndexList& parents(std::size_t j) const { return parents_.at(j); }
  const IndexList& children(std::size_t j) const { return children_.at(j); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t j) const { return labels_.at(j); }
  std::optional<std::size_t> index_of(const std::string& label) const;

  /// Position of parent h within sp(j), if h is a parent of j.
  std::optional<std::size_t> parent_position(std::size_t j, std::size_t h) const;

  std::size_t edge_count() const;
  bool has_edge(std::size_t child, std::size_t parent) const;

  friend GraphStructure build_graph(std::size_t q, std::vector<IndexList> parental_lists,
                                    std::vector<std::string> labels);

 private:
  std::vector<IndexList> parents_;
  std::vector<IndexList> children_;
  std::vector<std::string> labels_;
};

/// Validates and builds a graph. Throws StructuralError on self-parents,
/// out-of-range or duplicated indices, or a label count mismatch. Empty
/// `labels` yields "y0", "y1", ...
GraphStructure build_graph(std::size_t q, std::vector<IndexList> parental_lists,
                           std::vector<std::string> labels = {});

/// Builds a graph from {labels: [...], parents: {label: [labels]}}.
GraphStructure graph_from_json_text(const std::string& json_text);

struct ParentalSet {
  IndexList members;   // P_h, ascending
  IndexList children;  // ch(P_h), ascending
  std::size_t rank = 0;  // p_h = min(|P_h|, |ch(P_h)|)
};

struct ParentalPartition {
  std::vector<ParentalSet> sets;  // sorted by smallest member
  std::size_t p = 0;              // sum of p_h
  std::optional<bool> full_rank;  // set only when numeric blocks were examined

  /// Index of the set containing series j, if any.
  std::optional<std::size_t> set_of(std::size_t j) const;
};

ParentalPartition common_parental_sets(const GraphStructure& g);

/// Symmetric structural non-zero pattern of (I - G)' L (I - G).
BoolMatrix moral_pattern(const GraphStructure& g);

struct RankInfo {
  std::size_t p = 0;
  std::optional<bool> full_rank;
  std::vector<std::size_t> block_ranks;
};

/// Structural p = sum p_h; `full_rank` unset.
RankInfo structural_rank(const ParentalPartition& part);

/// Numerical rank of every block Phi_h of gamma' gamma, with singular values
/// below 1e-10 * largest treated as zero.
RankInfo structural_rank(const ParentalPartition& part, const Matrix& gamma);

struct EigenDiagnostics {
  bool acyclic = false;
  bool gershgorin_ok = false;
  std::vector<std::complex<double>> eigenvalues;
  double spectral_radius = 0.0;
  std::size_t zero_count = 0;
  std::optional<std::size_t> disjoint_cycle_bound;
};

inline constexpr std::size_t kMaxCycleSearchSize = 12;

bool is_acyclic(const GraphStructure& g);

/// Tarjan's strongly connected components over parent edges, each sorted.
std::vector<IndexList> strongly_connected_components(const GraphStructure& g);

/// Series lying on some directed cycle. Only their parental coefficients
/// enter det(I - gamma); every other series is decoupled from the weights.
std::vector<bool> coupled_series(const GraphStructure& g);

/// Greatest number of nodes covered by a collection of vertex-disjoint
/// directed cycles. Exhaustive; returns nullopt when q > 12.
std::optional<std::size_t> disjoint_cycle_bound(const GraphStructure& g);

/// Eigenvalues of a coefficient matrix with the graph's structure: computed
/// per strongly connected component, structural zeros exact.
std::vector<std::complex<double>> gamma_eigenvalues(const GraphStructure& g, const Matrix& gamma);

/// Throws StructuralError if gamma has a non-zero outside the graph pattern
/// or on the diagonal.
void check_gamma_pattern(const GraphStructure& g, const Matrix& gamma);

EigenDiagnostics eigen_diagnostics(const GraphStructure& g, const Matrix& gamma);

}  // namespace sgdlm
