#include "sgdlm/kernels.hpp"

#include "sgdlm/numeric.hpp"

#include <cmath>
#include <limits>

namespace sgdlm::kernels {

void GammaLayout::fill(const std::vector<Matrix>& theta, Eigen::Index r, Matrix& out) const {
  out.setZero(dim, dim);
  for (const auto& e : entries) out(e.row, e.col) = theta[e.series](e.state_index, r);
}

namespace {

GammaLayout layout_over(const GraphStructure& g, const std::vector<std::size_t>& n_phi,
                        const std::vector<bool>& keep) {
  GammaLayout out;
  std::vector<Eigen::Index> pos(g.q(), -1);
  for (std::size_t j = 0; j < g.q(); ++j) {
    if (!keep[j]) continue;
    pos[j] = static_cast<Eigen::Index>(out.nodes.size());
    out.nodes.push_back(j);
  }
  out.dim = static_cast<Eigen::Index>(out.nodes.size());
  for (std::size_t j = 0; j < g.q(); ++j) {
    if (!keep[j]) continue;
    const auto& sp = g.parents(j);
    for (std::size_t k = 0; k < sp.size(); ++k) {
      // Within a strongly connected set every edge between members lies on a
      // cycle; edges from outside only shift the triangular part.
      if (!keep[sp[k]]) continue;
      out.entries.push_back({pos[j], pos[sp[k]], j, static_cast<Eigen::Index>(n_phi.at(j) + k)});
    }
  }
  return out;
}

void check_phi(const GraphStructure& g, const std::vector<std::size_t>& n_phi) {
  if (n_phi.size() != g.q())
    throw DimensionError("gamma layout: expected " + std::to_string(g.q()) + " exogenous block sizes, got " +
                         std::to_string(n_phi.size()));
}

double log_abs_det_one(const GammaLayout& layout, const std::vector<Matrix>& theta, Eigen::Index r,
                       bool reject_explosive) {
  Matrix gam;
  layout.fill(theta, r, gam);
  if (reject_explosive) {
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Matrix>(gam, false).eigenvalues();
    if (ev.size() > 0 && ev.cwiseAbs().maxCoeff() >= 1.0) return -std::numeric_limits<double>::infinity();
  }
  const Matrix a = Matrix::Identity(layout.dim, layout.dim) - gam;
  const double v = numeric::log_abs_det(a);
  return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
}

void draw_series(const NGPosterior& ng, std::size_t R, std::uint64_t seed, Stream stream, std::uint64_t key,
                 std::size_t j, Matrix& theta_j, double* lambda_row, Eigen::Index lambda_stride) {
  ng.validate();
  Rng rng = make_rng(seed, stream, {key, static_cast<std::uint64_t>(j)});
  const Matrix L = numeric::robust_cholesky(ng.M, "draw_ng_batch: M");
  theta_j.resize(ng.m.size(), static_cast<Eigen::Index>(R));
  for (std::size_t r = 0; r < R; ++r) {
    const NGDraw d = sample_ng_one(ng, L, rng);
    theta_j.col(static_cast<Eigen::Index>(r)) = d.theta;
    lambda_row[static_cast<Eigen::Index>(r) * lambda_stride] = d.lambda;
  }
}

VBMoments moments_one(const Matrix& theta_j, const Matrix& lambda, std::size_t j, const Vector& w) {
  const auto R = theta_j.cols();
  const auto row = static_cast<Eigen::Index>(j);
  VBMoments out;
  Vector lt = Vector::Zero(theta_j.rows());
  for (Eigen::Index r = 0; r < R; ++r) {
    const double wl = w(r) * lambda(row, r);
    out.e_lambda += wl;
    out.e_log_lambda += w(r) * std::log(lambda(row, r));
    lt += wl * theta_j.col(r);
  }
  out.m = lt / out.e_lambda;
  out.M = Matrix::Zero(theta_j.rows(), theta_j.rows());
  for (Eigen::Index r = 0; r < R; ++r) {
    const Vector dev = theta_j.col(r) - out.m;
    out.M.noalias() += (w(r) * lambda(row, r)) * dev * dev.transpose();
  }
  out.M = numeric::symmetrize(out.M / out.e_lambda);
  return out;
}

void check_weights(const std::vector<Matrix>& theta, const Matrix& lambda, const Vector& w,
                   const std::vector<bool>& mask) {
  if (mask.size() != theta.size() || static_cast<Eigen::Index>(theta.size()) != lambda.rows())
    throw DimensionError("vb_moments: series count mismatch");
  if (w.size() != lambda.cols()) throw DimensionError("vb_moments: weight length mismatch");
}

double loglik_one(const ControlProblem& p, const std::vector<Matrix>& theta, const Matrix& lambda,
                  Eigen::Index r) {
  const auto q = lambda.rows();
  Matrix gam;
  p.layout->fill(theta, r, gam);
  Vector mu(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const Vector& x = (*p.x)[static_cast<std::size_t>(j)];
    mu(j) = x.size() > 0 ? x.dot(theta[static_cast<std::size_t>(j)].col(r).head(x.size())) : 0.0;
  }
  return control_marginal_logpdf(gam, mu, lambda.col(r), p.control, p.experimental, p.y_c);
}

void check_control(const ControlProblem& p, const Matrix& lambda) {
  if (p.layout == nullptr || p.x == nullptr) throw DimensionError("control_loglik_batch: incomplete problem");
  if (p.layout->dim != lambda.rows() || static_cast<Eigen::Index>(p.x->size()) != lambda.rows())
    throw DimensionError("control_loglik_batch: expects the full layout");
}

}  // namespace

GammaLayout full_layout(const GraphStructure& g, const std::vector<std::size_t>& n_phi) {
  check_phi(g, n_phi);
  return layout_over(g, n_phi, std::vector<bool>(g.q(), true));
}

GammaLayout coupled_layout(const GraphStructure& g, const std::vector<std::size_t>& n_phi) {
  check_phi(g, n_phi);
  return layout_over(g, n_phi, coupled_series(g));
}

double control_marginal_logpdf(const Matrix& gamma, const Vector& mu, const Vector& lambda,
                               const IndexList& control, const IndexList& experimental, const Vector& y_c) {
  const auto q = gamma.rows();
  if (control.empty()) return 0.0;
  if (static_cast<Eigen::Index>(control.size()) != y_c.size())
    throw DimensionError("control_marginal_logpdf: control length mismatch");
  const Matrix A = Matrix::Identity(q, q) - gamma;
  Eigen::PartialPivLU<Matrix> lu(A);
  const Vector alpha = lu.solve(mu);
  const Matrix omega = A.transpose() * lambda.asDiagonal() * A;
  const auto nc = static_cast<Eigen::Index>(control.size());
  const auto ne = static_cast<Eigen::Index>(experimental.size());
  Matrix oc(nc, nc), oce(nc, ne), oe(ne, ne);
  Vector dev(nc);
  for (Eigen::Index a = 0; a < nc; ++a) {
    const auto ia = static_cast<Eigen::Index>(control[static_cast<std::size_t>(a)]);
    dev(a) = y_c(a) - alpha(ia);
    for (Eigen::Index b = 0; b < nc; ++b) oc(a, b) = omega(ia, static_cast<Eigen::Index>(control[static_cast<std::size_t>(b)]));
    for (Eigen::Index b = 0; b < ne; ++b) oce(a, b) = omega(ia, static_cast<Eigen::Index>(experimental[static_cast<std::size_t>(b)]));
  }
  for (Eigen::Index a = 0; a < ne; ++a)
    for (Eigen::Index b = 0; b < ne; ++b)
      oe(a, b) = omega(static_cast<Eigen::Index>(experimental[static_cast<std::size_t>(a)]),
                       static_cast<Eigen::Index>(experimental[static_cast<std::size_t>(b)]));
  Matrix prec = oc;
  if (ne > 0) {
    Eigen::LLT<Matrix> llt(oe);
    if (llt.info() != Eigen::Success) throw NumericalError("control_marginal_logpdf: experimental precision not PD");
    // F = Omega_ce B' with B = L^{-1}, so F' = L^{-1} Omega_ec.
    const Matrix Ft = llt.matrixL().solve(oce.transpose());
    prec -= Ft.transpose() * Ft;
  }
  return numeric::mvn_logpdf_precision(dev, Vector::Zero(nc), numeric::symmetrize(prec));
}

namespace serial {

Vector log_abs_det_batch(const GammaLayout& layout, const std::vector<Matrix>& theta, Eigen::Index R,
                         bool reject_explosive) {
  Vector out = Vector::Zero(R);
  if (layout.dim == 0) return out;
  for (Eigen::Index r = 0; r < R; ++r) out(r) = log_abs_det_one(layout, theta, r, reject_explosive);
  return out;
}

void draw_ng_batch(const std::vector<NGPosterior>& ng, std::size_t R, std::uint64_t seed, Stream stream,
                   std::uint64_t key, std::vector<Matrix>& theta, Matrix& lambda) {
  const auto q = ng.size();
  theta.assign(q, Matrix());
  lambda.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(R));
  for (std::size_t j = 0; j < q; ++j)
    draw_series(ng[j], R, seed, stream, key, j, theta[j], lambda.data() + j, lambda.rows());
}

std::vector<VBMoments> vb_moments(const std::vector<Matrix>& theta, const Matrix& lambda, const Vector& w,
                                  const std::vector<bool>& mask) {
  check_weights(theta, lambda, w, mask);
  std::vector<VBMoments> out(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j)
    if (mask[j]) out[j] = moments_one(theta[j], lambda, j, w);
  return out;
}

Vector control_loglik_batch(const ControlProblem& p, const std::vector<Matrix>& theta, const Matrix& lambda) {
  check_control(p, lambda);
  Vector out(lambda.cols());
  for (Eigen::Index r = 0; r < lambda.cols(); ++r) out(r) = loglik_one(p, theta, lambda, r);
  return out;
}

}  // namespace serial

namespace omp {

Vector log_abs_det_batch(const GammaLayout& layout, const std::vector<Matrix>& theta, Eigen::Index R,
                         bool reject_explosive) {
  Vector out = Vector::Zero(R);
  if (layout.dim == 0) return out;
  for_each_index(Exec::parallel, static_cast<std::size_t>(R), [&](std::size_t r) {
    out(static_cast<Eigen::Index>(r)) = log_abs_det_one(layout, theta, static_cast<Eigen::Index>(r), reject_explosive);
  });
  return out;
}

void draw_ng_batch(const std::vector<NGPosterior>& ng, std::size_t R, std::uint64_t seed, Stream stream,
                   std::uint64_t key, std::vector<Matrix>& theta, Matrix& lambda) {
  const auto q = ng.size();
  theta.assign(q, Matrix());
  lambda.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(R));
  for_each_index(Exec::parallel, q, [&](std::size_t j) {
    draw_series(ng[j], R, seed, stream, key, j, theta[j], lambda.data() + j, lambda.rows());
  });
}

std::vector<VBMoments> vb_moments(const std::vector<Matrix>& theta, const Matrix& lambda, const Vector& w,
                                  const std::vector<bool>& mask) {
  check_weights(theta, lambda, w, mask);
  std::vector<VBMoments> out(theta.size());
  for_each_index(Exec::parallel, theta.size(), [&](std::size_t j) {
    if (mask[j]) out[j] = moments_one(theta[j], lambda, j, w);
  });
  return out;
}

Vector control_loglik_batch(const ControlProblem& p, const std::vector<Matrix>& theta, const Matrix& lambda) {
  check_control(p, lambda);
  Vector out(lambda.cols());
  for_each_index(Exec::parallel, static_cast<std::size_t>(lambda.cols()), [&](std::size_t r) {
    out(static_cast<Eigen::Index>(r)) = loglik_one(p, theta, lambda, static_cast<Eigen::Index>(r));
  });
  return out;
}

}  // namespace omp

Vector log_abs_det_batch(Exec ex, const GammaLayout& layout, const std::vector<Matrix>& theta, Eigen::Index R,
                         bool reject_explosive) {
  return ex == Exec::serial ? serial::log_abs_det_batch(layout, theta, R, reject_explosive)
                            : omp::log_abs_det_batch(layout, theta, R, reject_explosive);
}

void draw_ng_batch(Exec ex, const std::vector<NGPosterior>& ng, std::size_t R, std::uint64_t seed, Stream stream,
                   std::uint64_t key, std::vector<Matrix>& theta, Matrix& lambda) {
  if (ex == Exec::serial)
    serial::draw_ng_batch(ng, R, seed, stream, key, theta, lambda);
  else
    omp::draw_ng_batch(ng, R, seed, stream, key, theta, lambda);
}

std::vector<VBMoments> vb_moments(Exec ex, const std::vector<Matrix>& theta, const Matrix& lambda,
                                  const Vector& w, const std::vector<bool>& mask) {
  return ex == Exec::serial ? serial::vb_moments(theta, lambda, w, mask) : omp::vb_moments(theta, lambda, w, mask);
}

Vector control_loglik_batch(Exec ex, const ControlProblem& p, const std::vector<Matrix>& theta,
                            const Matrix& lambda) {
  return ex == Exec::serial ? serial::control_loglik_batch(p, theta, lambda)
                            : omp::control_loglik_batch(p, theta, lambda);
}

}  // namespace sgdlm::kernels
