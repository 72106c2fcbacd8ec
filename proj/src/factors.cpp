#include "sgdlm/factors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sgdlm {

namespace {

std::vector<bool> support(const Matrix& F, Eigen::Index row) {
  std::vector<bool> s(static_cast<std::size_t>(F.cols()));
  for (Eigen::Index c = 0; c < F.cols(); ++c) s[static_cast<std::size_t>(c)] = std::abs(F(row, c)) > kFactorZeroTol;
  return s;
}

bool same_support(const std::vector<bool>& s, const BoolMatrix& ref, Eigen::Index row) {
  for (Eigen::Index c = 0; c < ref.cols(); ++c)
    if (s[static_cast<std::size_t>(c)] != ref(row, c)) return false;
  return true;
}

Eigen::Index pivot(const Matrix& F, Eigen::Index row) {
  Eigen::Index k = 0;
  F.row(row).cwiseAbs().maxCoeff(&k);
  return k;
}

}  // namespace

FactorDecomposition svd_factorize(const Matrix& gamma, const ParentalPartition& part) {
  const auto q = gamma.rows();
  if (gamma.cols() != q) throw DimensionError("svd_factorize: gamma must be square");
  // Every non-zero must sit in some block (children of P_h) x P_h.
  std::vector<std::optional<std::size_t>> col_set(static_cast<std::size_t>(q));
  std::vector<std::optional<std::size_t>> row_set(static_cast<std::size_t>(q));
  for (std::size_t h = 0; h < part.sets.size(); ++h) {
    for (auto j : part.sets[h].members) col_set.at(j) = h;
    for (auto i : part.sets[h].children) row_set.at(i) = h;
  }
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index j = 0; j < q; ++j) {
      if (gamma(i, j) == 0.0) continue;
      const auto& cs = col_set[static_cast<std::size_t>(j)];
      const auto& rs = row_set[static_cast<std::size_t>(i)];
      if (!cs || !rs || *cs != *rs)
        throw StructuralError("svd_factorize: entry (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") lies outside the parental blocks");
    }

  const RankInfo rank = structural_rank(part, gamma);
  struct Piece {
    double d;
    Vector l;
    Vector f;
  };
  std::vector<Piece> pieces;
  for (std::size_t h = 0; h < part.sets.size(); ++h) {
    const auto& s = part.sets[h];
    const Matrix block = gamma(s.children, s.members);
    Eigen::JacobiSVD<Matrix> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto r = static_cast<Eigen::Index>(rank.block_ranks[h]);
    for (Eigen::Index k = 0; k < r; ++k) {
      Piece pc{svd.singularValues()(k), Vector::Zero(q), Vector::Zero(q)};
      for (std::size_t a = 0; a < s.children.size(); ++a)
        pc.l(static_cast<Eigen::Index>(s.children[a])) = svd.matrixU()(static_cast<Eigen::Index>(a), k);
      for (std::size_t a = 0; a < s.members.size(); ++a)
        pc.f(static_cast<Eigen::Index>(s.members[a])) = svd.matrixV()(static_cast<Eigen::Index>(a), k);
      pieces.push_back(std::move(pc));
    }
  }
  std::stable_sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) { return a.d > b.d; });

  FactorDecomposition dec;
  dec.p = pieces.size();
  const auto p = static_cast<Eigen::Index>(dec.p);
  dec.L.resize(q, p);
  dec.D.resize(p);
  dec.F.resize(p, q);
  for (Eigen::Index k = 0; k < p; ++k) {
    dec.L.col(k) = pieces[static_cast<std::size_t>(k)].l;
    dec.D(k) = pieces[static_cast<std::size_t>(k)].d;
    dec.F.row(k) = pieces[static_cast<std::size_t>(k)].f.transpose();
  }
  for (Eigen::Index k = 0; k < p; ++k) {
    std::optional<std::size_t> set;
    const auto sup = support(dec.F, k);
    for (Eigen::Index c = 0; c < q; ++c) {
      if (!sup[static_cast<std::size_t>(c)]) continue;
      const auto& cs = col_set[static_cast<std::size_t>(c)];
      if (!cs || (set && *set != *cs))
        throw NumericalError("svd_factorize: score row " + std::to_string(k) + " straddles parental sets");
      set = cs;
    }
    if (!set) throw NumericalError("svd_factorize: score row " + std::to_string(k) + " is empty");
    dec.set_assignment.push_back(*set);
  }
  dec.reference_pattern = score_pattern(part, dec.set_assignment, static_cast<std::size_t>(q));
  return dec;
}

BoolMatrix score_pattern(const ParentalPartition& part, const IndexList& set_assignment, std::size_t q) {
  BoolMatrix pat = BoolMatrix::Constant(static_cast<Eigen::Index>(set_assignment.size()), static_cast<Eigen::Index>(q), false);
  for (std::size_t k = 0; k < set_assignment.size(); ++k)
    for (auto j : part.sets.at(set_assignment[k]).members) pat(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = true;
  return pat;
}

FactorDecomposition canonicalize(const FactorDecomposition& dec, const BoolMatrix& reference) {
  const auto p = static_cast<Eigen::Index>(dec.p);
  const auto q = dec.F.cols();
  if (reference.rows() != p || reference.cols() != q)
    throw StructuralError("canonicalize: reference pattern is " + std::to_string(reference.rows()) + "x" +
                          std::to_string(reference.cols()) + ", decomposition has " + std::to_string(p) +
                          " factors over " + std::to_string(q) + " series");
  // 1. match factors to reference rows by support
  std::vector<Eigen::Index> order(static_cast<std::size_t>(p), -1);
  std::vector<bool> used(static_cast<std::size_t>(p), false);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index k = 0; k < p; ++k) {
      if (used[static_cast<std::size_t>(k)] || !same_support(support(dec.F, k), reference, i)) continue;
      order[static_cast<std::size_t>(i)] = k;
      used[static_cast<std::size_t>(k)] = true;
      break;
    }
    if (order[static_cast<std::size_t>(i)] < 0)
      throw StructuralError("canonicalize: no factor matches reference row " + std::to_string(i));
  }
  FactorDecomposition out;
  out.p = dec.p;
  out.L.resize(dec.L.rows(), p);
  out.D.resize(p);
  out.F.resize(p, q);
  out.set_assignment.resize(dec.p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto k = order[static_cast<std::size_t>(i)];
    out.L.col(i) = dec.L.col(k);
    out.D(i) = dec.D(k);
    out.F.row(i) = dec.F.row(k);
    out.set_assignment[static_cast<std::size_t>(i)] = dec.set_assignment[static_cast<std::size_t>(k)];
    // 2. positive pivot
    if (out.F(i, pivot(out.F, i)) < 0.0) {
      out.F.row(i) *= -1.0;
      out.L.col(i) *= -1.0;
    }
  }
  // 3. within rows sharing a pattern, descending pivot magnitude
  std::vector<bool> done(static_cast<std::size_t>(p), false);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (done[static_cast<std::size_t>(i)]) continue;
    std::vector<Eigen::Index> group;
    for (Eigen::Index k = i; k < p; ++k)
      if (!done[static_cast<std::size_t>(k)] && reference.row(k) == reference.row(i)) group.push_back(k);
    for (auto k : group) done[static_cast<std::size_t>(k)] = true;
    if (group.size() < 2) continue;
    std::vector<Eigen::Index> by = group;
    std::stable_sort(by.begin(), by.end(), [&](Eigen::Index a, Eigen::Index b) {
      return out.F.row(a).cwiseAbs().maxCoeff() > out.F.row(b).cwiseAbs().maxCoeff();
    });
    const Matrix L0 = out.L, F0 = out.F;
    const Vector D0 = out.D;
    const IndexList S0 = out.set_assignment;
    for (std::size_t a = 0; a < group.size(); ++a) {
      out.L.col(group[a]) = L0.col(by[a]);
      out.D(group[a]) = D0(by[a]);
      out.F.row(group[a]) = F0.row(by[a]);
      out.set_assignment[static_cast<std::size_t>(group[a])] = S0[static_cast<std::size_t>(by[a])];
    }
  }
  out.reference_pattern = reference;
  return out;
}

FactorSeries factor_series(const std::vector<Matrix>& gammas, const std::vector<Eigen::Index>& times,
                           const Matrix& y, const ParentalPartition& part, const std::optional<BoolMatrix>& reference,
                           std::size_t reference_index) {
  if (gammas.size() != times.size() || y.rows() != static_cast<Eigen::Index>(gammas.size()))
    throw DimensionError("factor_series: gammas, times and data rows must align");
  if (gammas.empty()) return {};
  if (!reference && reference_index >= gammas.size())
    throw ConfigError("factor_series: reference index out of range");
  std::vector<FactorDecomposition> raw;
  for (const auto& g : gammas) raw.push_back(svd_factorize(g, part));
  FactorSeries out;
  out.times = times;
  out.reference = reference ? *reference : raw[reference_index].reference_pattern;
  const auto p = out.reference.rows();
  out.phi.resize(p, static_cast<Eigen::Index>(gammas.size()));
  out.singular.resize(p, static_cast<Eigen::Index>(gammas.size()));
  for (std::size_t t = 0; t < raw.size(); ++t) {
    auto dec = canonicalize(raw[t], out.reference);
    const auto c = static_cast<Eigen::Index>(t);
    out.phi.col(c) = dec.D.asDiagonal() * (dec.F * y.row(c).transpose());
    out.singular.col(c) = dec.D;
    out.decompositions.push_back(std::move(dec));
  }
  return out;
}

FactorCovariances factor_covariances(const FactorDecomposition& dec, const JointMoments& joint) {
  const auto q = joint.gamma.rows();
  if (dec.F.cols() != q) throw DimensionError("factor_covariances: dimension mismatch");
  const Matrix A = Matrix::Identity(q, q) - joint.gamma;
  Eigen::LLT<Matrix> llt(joint.omega);
  if (llt.info() != Eigen::Success) throw NumericalError("factor_covariances: precision not positive definite");
  const Matrix sigma = llt.solve(Matrix::Identity(q, q));
  const Matrix DF = dec.D.asDiagonal() * dec.F;
  FactorCovariances out;
  out.v_phi = DF * sigma * DF.transpose();
  // Lambda^{-1} = A Sigma A', so (I - Gamma)^{-1} Lambda^{-1} = Sigma A'.
  out.c_phi_nu = DF * sigma * A.transpose();
  return out;
}

}  // namespace sgdlm
