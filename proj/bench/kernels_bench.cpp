// Serial reference against OpenMP kernels on the 16-series GDP graph with
// two lag regressors per series. Run with OMP_NUM_THREADS / --threads to
// vary the team size; outputs are identical across the two paths.

#include "sgdlm/counterfactual.hpp"
#include "sgdlm/engine.hpp"
#include "sgdlm/kernels.hpp"

#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

using namespace sgdlm;

namespace {

GraphStructure load_graph() {
  std::ifstream in(std::string(SGDLM_DATA_DIR) + "/gdp_graph.json");
  std::stringstream ss;
  ss << in.rdbuf();
  return graph_from_json_text(ss.str());
}

struct Fixture {
  ModelSpec spec;
  std::vector<Vector> x;
  Vector y;
  std::vector<Matrix> theta;
  Matrix lambda;
  Vector w;
  kernels::GammaLayout full, coupled;

  explicit Fixture(std::size_t R) {
    spec.graph = load_graph();
    spec.R = R;
    const auto q = spec.graph.q();
    for (std::size_t j = 0; j < q; ++j) {
      spec.design.push_back({true, {{6, 1}, {12, 1}}});
      spec.discount.push_back({0.95, 0.95, 0.95});
      const auto d = static_cast<Eigen::Index>(3 + spec.graph.parents(j).size());
      NGPosterior p;
      p.m = Vector::Zero(d);
      p.m(0) = 0.05;
      p.M = Matrix::Identity(d, d) * 0.1;
      p.n = 10;
      p.s = 0.0004;
      p.n_phi = 3;
      spec.prior.push_back(p);
    }
    x.assign(q, Vector::Constant(3, 0.03));
    y = Vector::Constant(static_cast<Eigen::Index>(q), 0.03);
    kernels::serial::draw_ng_batch(spec.prior, R, 1, Stream::is_draws, 0, theta, lambda);
    w = Vector::Constant(static_cast<Eigen::Index>(R), 1.0 / static_cast<double>(R));
    full = kernels::full_layout(spec.graph, spec.n_phi());
    coupled = kernels::coupled_layout(spec.graph, spec.n_phi());
  }
};

const Fixture& fixture(std::size_t R) {
  static Fixture small(1000), large(10000);
  return R == 1000 ? small : large;
}

Exec exec_of(const benchmark::State& st) { return st.range(1) ? Exec::parallel : Exec::serial; }

void BM_log_abs_det(benchmark::State& st) {
  const auto& f = fixture(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st)
    benchmark::DoNotOptimize(kernels::log_abs_det_batch(exec_of(st), f.coupled, f.theta, st.range(0), true));
}

void BM_draw_ng(benchmark::State& st) {
  const auto& f = fixture(static_cast<std::size_t>(st.range(0)));
  std::vector<Matrix> theta;
  Matrix lambda;
  for (auto _ : st) {
    kernels::draw_ng_batch(exec_of(st), f.spec.prior, static_cast<std::size_t>(st.range(0)), 2, Stream::is_draws, 0,
                           theta, lambda);
    benchmark::DoNotOptimize(lambda.data());
  }
}

void BM_vb_moments(benchmark::State& st) {
  const auto& f = fixture(static_cast<std::size_t>(st.range(0)));
  const std::vector<bool> mask(f.spec.q(), true);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::vb_moments(exec_of(st), f.theta, f.lambda, f.w, mask));
}

void BM_control_loglik(benchmark::State& st) {
  const auto& f = fixture(static_cast<std::size_t>(st.range(0)));
  kernels::ControlProblem p;
  p.layout = &f.full;
  p.x = &f.x;
  p.control = {6, 12};
  for (std::size_t j = 0; j < f.spec.q(); ++j)
    if (j != 6 && j != 12) p.experimental.push_back(j);
  p.y_c = Vector::Constant(2, 0.03);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::control_loglik_batch(exec_of(st), p, f.theta, f.lambda));
}

void BM_is_update(benchmark::State& st) {
  auto spec = fixture(static_cast<std::size_t>(st.range(0))).spec;
  spec.exec = exec_of(st);
  const auto& f = fixture(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(is_update(spec, spec.prior, f.x, f.y, 3, 0));
}

void args(benchmark::internal::Benchmark* b) {
  b->ArgNames({"R", "omp"});
  for (int R : {1000, 10000})
    for (int omp : {0, 1}) b->Args({R, omp});
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_log_abs_det)->Apply(args);
BENCHMARK(BM_draw_ng)->Apply(args);
BENCHMARK(BM_vb_moments)->Apply(args);
BENCHMARK(BM_control_loglik)->Apply(args);
BENCHMARK(BM_is_update)->Apply(args);

BENCHMARK_MAIN();
