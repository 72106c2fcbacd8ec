#include "sgdlm/structure.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <numeric>

namespace sgdlm {

std::optional<std::size_t> GraphStructure::index_of(const std::string& label) const {
  for (std::size_t j = 0; j < labels_.size(); ++j)
    if (labels_[j] == label) return j;
  return std::nullopt;
}

std::optional<std::size_t> GraphStructure::parent_position(std::size_t j, std::size_t h) const {
  const auto& sp = parents_.at(j);
  for (std::size_t k = 0; k < sp.size(); ++k)
    if (sp[k] == h) return k;
  return std::nullopt;
}

std::size_t GraphStructure::edge_count() const {
  std::size_t n = 0;
  for (const auto& sp : parents_) n += sp.size();
  return n;
}

bool GraphStructure::has_edge(std::size_t child, std::size_t parent) const {
  return parent_position(child, parent).has_value();
}

GraphStructure build_graph(std::size_t q, std::vector<IndexList> parental_lists,
                           std::vector<std::string> labels) {
  if (parental_lists.size() != q)
    throw StructuralError("build_graph: expected " + std::to_string(q) + " parental lists, got " +
                          std::to_string(parental_lists.size()));
  if (labels.empty()) {
    labels.reserve(q);
    for (std::size_t j = 0; j < q; ++j) labels.push_back("y" + std::to_string(j));
  }
  if (labels.size() != q) throw StructuralError("build_graph: label count does not match q");

  GraphStructure g;
  g.children_.assign(q, {});
  for (std::size_t j = 0; j < q; ++j) {
    const auto& sp = parental_lists[j];
    for (std::size_t k = 0; k < sp.size(); ++k) {
      const std::size_t h = sp[k];
      if (h >= q)
        throw StructuralError("build_graph: parent index " + std::to_string(h) + " of series " +
                              std::to_string(j) + " out of range");
      if (h == j) throw StructuralError("build_graph: series " + std::to_string(j) + " lists itself as a parent");
      if (std::find(sp.begin(), sp.begin() + static_cast<std::ptrdiff_t>(k), h) !=
          sp.begin() + static_cast<std::ptrdiff_t>(k))
        throw StructuralError("build_graph: duplicate parent " + std::to_string(h) + " of series " +
                              std::to_string(j));
      g.children_[h].push_back(j);
    }
  }
  g.parents_ = std::move(parental_lists);
  g.labels_ = std::move(labels);
  return g;
}

GraphStructure graph_from_json_text(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw StructuralError(std::string("graph JSON: ") + e.what());
  }
  if (!doc.contains("labels") || !doc["labels"].is_array())
    throw StructuralError("graph JSON: missing 'labels' array");
  std::vector<std::string> labels = doc["labels"].get<std::vector<std::string>>();
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (!index.emplace(labels[j], j).second) throw StructuralError("graph JSON: duplicate label " + labels[j]);
  }
  std::vector<IndexList> lists(labels.size());
  if (doc.contains("parents")) {
    for (const auto& [child, plist] : doc["parents"].items()) {
      auto it = index.find(child);
      if (it == index.end()) throw StructuralError("graph JSON: unknown series " + child);
      for (const auto& p : plist) {
        const auto name = p.get<std::string>();
        auto pit = index.find(name);
        if (pit == index.end()) throw StructuralError("graph JSON: unknown parent " + name + " of " + child);
        lists[it->second].push_back(pit->second);
      }
    }
  }
  const std::size_t q = labels.size();
  return build_graph(q, std::move(lists), std::move(labels));
}

std::optional<std::size_t> ParentalPartition::set_of(std::size_t j) const {
  for (std::size_t h = 0; h < sets.size(); ++h)
    if (std::binary_search(sets[h].members.begin(), sets[h].members.end(), j)) return h;
  return std::nullopt;
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

ParentalPartition common_parental_sets(const GraphStructure& g) {
  const std::size_t q = g.q();
  UnionFind uf(q);
  for (std::size_t k = 0; k < q; ++k) {
    const auto& sp = g.parents(k);
    for (std::size_t i = 1; i < sp.size(); ++i) uf.unite(sp[0], sp[i]);
  }
  std::map<std::size_t, ParentalSet> by_root;
  for (std::size_t j = 0; j < q; ++j) {
    if (g.children(j).empty()) continue;
    by_root[uf.find(j)].members.push_back(j);
  }
  ParentalPartition part;
  for (auto& [root, set] : by_root) {
    std::vector<bool> is_child(q, false);
    for (auto j : set.members)
      for (auto c : g.children(j)) is_child[c] = true;
    for (std::size_t c = 0; c < q; ++c)
      if (is_child[c]) set.children.push_back(c);
    set.rank = std::min(set.members.size(), set.children.size());
    part.p += set.rank;
    part.sets.push_back(std::move(set));
  }
  std::sort(part.sets.begin(), part.sets.end(),
            [](const ParentalSet& a, const ParentalSet& b) { return a.members.front() < b.members.front(); });
  return part;
}

BoolMatrix moral_pattern(const GraphStructure& g) {
  const auto q = static_cast<Eigen::Index>(g.q());
  BoolMatrix pat = BoolMatrix::Constant(q, q, false);
  for (Eigen::Index i = 0; i < q; ++i) pat(i, i) = true;
  for (std::size_t k = 0; k < g.q(); ++k) {
    const auto& sp = g.parents(k);
    for (auto h : sp) {
      pat(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(h)) = true;
      pat(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(k)) = true;
    }
    for (auto a : sp)
      for (auto b : sp) pat(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = true;
  }
  return pat;
}

RankInfo structural_rank(const ParentalPartition& part) {
  RankInfo info;
  for (const auto& s : part.sets) info.block_ranks.push_back(s.rank);
  info.p = part.p;
  return info;
}

RankInfo structural_rank(const ParentalPartition& part, const Matrix& gamma) {
  RankInfo info;
  bool full = true;
  for (const auto& s : part.sets) {
    const auto m = static_cast<Eigen::Index>(s.members.size());
    Matrix cols(gamma.rows(), m);
    for (Eigen::Index c = 0; c < m; ++c) cols.col(c) = gamma.col(static_cast<Eigen::Index>(s.members[c]));
    const Matrix phi = cols.transpose() * cols;
    Eigen::JacobiSVD<Matrix> svd(phi);
    const auto& sv = svd.singularValues();
    std::size_t rank = 0;
    if (sv.size() > 0 && sv(0) > 0.0) {
      const double cut = 1e-10 * sv(0);
      for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rank;
    }
    info.block_ranks.push_back(rank);
    info.p += rank;
    if (rank != s.rank) full = false;
  }
  info.full_rank = full;
  return info;
}

bool is_acyclic(const GraphStructure& g) {
  const std::size_t q = g.q();
  // 0 = unvisited, 1 = on stack, 2 = done. Iterative DFS along parent edges.
  std::vector<int> state(q, 0);
  for (std::size_t root = 0; root < q; ++root) {
    if (state[root] != 0) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const auto& sp = g.parents(node);
      if (next < sp.size()) {
        const std::size_t h = sp[next++];
        if (state[h] == 1) return false;
        if (state[h] == 0) {
          state[h] = 1;
          stack.emplace_back(h, 0);
        }
      } else {
        state[node] = 2;
        stack.pop_back();
      }
    }
  }
  return true;
}

namespace {

// Kuhn's augmenting-path matching on the vertices listed in `subset`
// selected by `mask`: vertex i may match h when h is in sp(i). A perfect
// matching is a cover of the selected vertices by disjoint directed cycles.
bool has_cycle_cover(const GraphStructure& g, const IndexList& subset, std::uint64_t mask) {
  const std::size_t q = g.q();
  std::vector<bool> in(q, false);
  for (std::size_t k = 0; k < subset.size(); ++k)
    if (mask >> k & 1U) in[subset[k]] = true;
  std::vector<int> match_right(q, -1);
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (!(mask >> k & 1U)) continue;
    std::vector<bool> seen(q, false);
    auto augment = [&](auto&& self, std::size_t u) -> bool {
      for (auto h : g.parents(u)) {
        if (!in[h] || seen[h]) continue;
        seen[h] = true;
        if (match_right[h] < 0 || self(self, static_cast<std::size_t>(match_right[h]))) {
          match_right[h] = static_cast<int>(u);
          return true;
        }
      }
      return false;
    };
    if (!augment(augment, subset[k])) return false;
  }
  return true;
}

std::size_t cycle_cover_bound(const GraphStructure& g, const IndexList& subset) {
  std::size_t best = 0;
  const std::uint64_t limit = std::uint64_t{1} << subset.size();
  for (std::uint64_t mask = 1; mask < limit; ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    if (size <= best) continue;
    if (has_cycle_cover(g, subset, mask)) best = size;
  }
  return best;
}

}  // namespace

std::vector<IndexList> strongly_connected_components(const GraphStructure& g) {
  const std::size_t q = g.q();
  std::vector<int> index(q, -1), low(q, 0);
  std::vector<bool> on_stack(q, false);
  IndexList stack;
  std::vector<IndexList> out;
  int counter = 0;
  auto visit = [&](auto&& self, std::size_t v) -> void {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (auto h : g.parents(v)) {
      if (index[h] < 0) {
        self(self, h);
        low[v] = std::min(low[v], low[h]);
      } else if (on_stack[h]) {
        low[v] = std::min(low[v], index[h]);
      }
    }
    if (low[v] == index[v]) {
      IndexList comp;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
  };
  for (std::size_t v = 0; v < q; ++v)
    if (index[v] < 0) visit(visit, v);
  return out;
}

std::vector<bool> coupled_series(const GraphStructure& g) {
  std::vector<bool> out(g.q(), false);
  for (const auto& comp : strongly_connected_components(g))
    if (comp.size() > 1)
      for (auto j : comp) out[j] = true;
  return out;
}

namespace {

constexpr std::size_t kMaxSnapComponent = 16;

}  // namespace

std::optional<std::size_t> disjoint_cycle_bound(const GraphStructure& g) {
  const std::size_t q = g.q();
  if (q > kMaxCycleSearchSize) return std::nullopt;
  IndexList all(q);
  std::iota(all.begin(), all.end(), 0);
  return cycle_cover_bound(g, all);
}

std::vector<std::complex<double>> gamma_eigenvalues(const GraphStructure& g, const Matrix& gamma) {
  // The spectrum of gamma is the union of the spectra of its strongly
  // connected diagonal blocks; singleton blocks contribute exact zeros.
  // Within a block, |block| - r_block eigenvalues are structurally zero and
  // are snapped to zero when the solver returns them below 1e-6 * scale.
  std::vector<std::complex<double>> out;
  for (const auto& comp : strongly_connected_components(g)) {
    if (comp.size() == 1) {
      out.emplace_back(0.0, 0.0);
      continue;
    }
    const auto m = static_cast<Eigen::Index>(comp.size());
    Matrix block(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b)
        block(a, b) = gamma(static_cast<Eigen::Index>(comp[a]), static_cast<Eigen::Index>(comp[b]));
    Eigen::EigenSolver<Matrix> es(block, false);
    std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + m);
    if (comp.size() <= kMaxSnapComponent) {
      const std::size_t zeros = comp.size() - cycle_cover_bound(g, comp);
      if (zeros > 0) {
        std::vector<std::size_t> order(ev.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return std::abs(ev[a]) < std::abs(ev[b]); });
        const double scale = std::max(1.0, block.cwiseAbs().maxCoeff());
        for (std::size_t k = 0; k < zeros; ++k)
          if (std::abs(ev[order[k]]) < 1e-6 * scale) ev[order[k]] = 0.0;
      }
    }
    out.insert(out.end(), ev.begin(), ev.end());
  }
  return out;
}

void check_gamma_pattern(const GraphStructure& g, const Matrix& gamma) {
  const auto q = static_cast<Eigen::Index>(g.q());
  if (gamma.rows() != q || gamma.cols() != q) throw StructuralError("gamma: dimension does not match graph");
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index j = 0; j < q; ++j)
      if (gamma(i, j) != 0.0 && !g.has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j)))
        throw StructuralError("gamma: non-zero entry (" + std::to_string(i) + "," + std::to_string(j) +
                              ") outside the parental pattern");
}

EigenDiagnostics eigen_diagnostics(const GraphStructure& g, const Matrix& gamma) {
  check_gamma_pattern(g, gamma);
  EigenDiagnostics d;
  d.acyclic = is_acyclic(g);
  d.gershgorin_ok = true;
  for (Eigen::Index i = 0; i < gamma.rows(); ++i)
    if (!(gamma.row(i).cwiseAbs().sum() < 1.0)) d.gershgorin_ok = false;
  d.eigenvalues = gamma_eigenvalues(g, gamma);
  for (const auto& e : d.eigenvalues) d.spectral_radius = std::max(d.spectral_radius, std::abs(e));
  const double tol = 1e-10 * std::max(1.0, d.spectral_radius);
  for (const auto& e : d.eigenvalues)
    if (std::abs(e) < tol) ++d.zero_count;
  d.disjoint_cycle_bound = disjoint_cycle_bound(g);
  return d;
}

}  // namespace sgdlm
