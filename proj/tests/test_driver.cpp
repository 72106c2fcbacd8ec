#include "doctest.h"
#include "helpers.hpp"

#include "sgdlm/driver.hpp"
#include "sgdlm/io.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

using namespace sgdlm;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("sgdlm_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Levels for q series drifting randomly, so log returns are well defined.
void write_levels(const fs::path& p, const std::vector<std::string>& labels, std::size_t rows, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::test);
  TimeSeriesTable t;
  t.labels = labels;
  t.y.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(labels.size()));
  for (Eigen::Index c = 0; c < t.y.cols(); ++c) {
    double level = 100.0;
    for (Eigen::Index r = 0; r < t.y.rows(); ++r) {
      level *= std::exp(0.02 + 0.03 * draw_normal(rng));
      t.y(r, c) = level;
    }
  }
  for (std::size_t r = 0; r < rows; ++r) t.times.push_back(std::to_string(1960 + r));
  write_table(p, t);
}

std::map<std::string, double> row_map(const std::vector<StepRecordRow>& rows) {
  std::map<std::string, double> m;
  for (const auto& r : rows) m[r.t + "|" + r.label + "|" + r.statistic] = r.value;
  return m;
}

}  // namespace

TEST_CASE("diagnose on the GDP graph") {
  TempDir dir("diagnose");
  write_file(dir.path / "cfg.json", R"({"version": 1, "seed": 1, "graph_file": ")" + data_path("gdp_graph.json") +
                                        R"("})");
  auto res = run_command({"diagnose", dir.path / "cfg.json", dir.path / "out", std::nullopt, std::nullopt});
  auto rep = nlohmann::json::parse(read_text(dir.path / "out" / "diagnose.json"));
  CHECK(rep["parental_sets"].size() == 5);
  CHECK(rep["structural_p"] == 9);
  CHECK(rep["zero_gamma_columns"].size() == 7);
  CHECK(rep["q"] == 16);
  CHECK(fs::exists(dir.path / "out" / "manifest.json"));
  CHECK(res.summary.front().find("structural p = 9") != std::string::npos);
}

TEST_CASE("fit with R = 1 on an empty graph is the exact conjugate trajectory") {
  TempDir dir("fit_exact");
  write_levels(dir.path / "d.csv", {"A", "B", "C"}, 12, 1);
  write_file(dir.path / "cfg.json", R"({"version": 1, "seed": 3, "R": 1,
    "data": {"path": "d.csv", "transform": "log-return"},
    "graph": {"labels": ["A", "B", "C"], "parents": {}},
    "prior": {"v_phi": 0.5, "n": 3, "s": 0.001},
    "discount": {"delta": 0.95, "beta": 0.97}})");
  run_command({"fit", dir.path / "cfg.json", std::nullopt, std::nullopt, std::nullopt});
  auto rows = row_map(read_rows(dir.path / "out" / "posterior.csv"));
  auto data = ingest(dir.path / "d.csv", Transform::log_return);

  for (Eigen::Index j = 0; j < 3; ++j) {
    NGPosterior ng;
    ng.m = Vector::Zero(1);
    ng.M = Matrix::Constant(1, 1, 0.5);
    ng.n = 3;
    ng.s = 0.001;
    ng.n_phi = 1;
    for (Eigen::Index t = 0; t < data.y.rows(); ++t) {
      ng = conjugate_update(ng, Vector::Ones(1), data.y(t, j));
      const auto key = data.times[static_cast<std::size_t>(t)] + "|" + data.labels[static_cast<std::size_t>(j)] + "|";
      CHECK(rows.at(key + "intercept:mean") == doctest::Approx(ng.m(0)).epsilon(1e-12));
      CHECK(rows.at(key + "dof") == doctest::Approx(ng.n).epsilon(1e-12));
      CHECK(rows.at(key + "s") == doctest::Approx(ng.s).epsilon(1e-12));
      ng = evolve(ng, Matrix::Identity(1, 1), {0.95, 0.95, 0.97});
    }
  }
  CHECK(rows.at(data.times[0] + "|all|ess_fraction") == 1.0);
}

TEST_CASE("manifest reproduces the run") {
  TempDir dir("manifest");
  write_levels(dir.path / "d.csv", {"A", "B"}, 15, 2);
  write_file(dir.path / "cfg.json", R"({"version": 1, "seed": 11, "R": 300, "marglik": true,
    "data": {"path": "d.csv"},
    "graph": {"labels": ["A", "B"], "parents": {"A": ["B"], "B": ["A"]}},
    "prior": {"s": 0.001}, "discount": {"delta": 0.98, "beta": 0.98}})");
  auto first = run_command({"fit", dir.path / "cfg.json", dir.path / "a", 99, 2});
  CHECK(first.manifest["seed"] == 99);
  CHECK(first.manifest["data"]["rows"] == 14);
  auto second = run_command({"fit", dir.path / "a" / "manifest.json", dir.path / "b", std::nullopt, 1});
  CHECK(second.manifest["seed"] == 99);
  for (const auto& name : first.outputs) CHECK(read_text(dir.path / "a" / name) == read_text(dir.path / "b" / name));
  auto other = run_command({"fit", dir.path / "cfg.json", dir.path / "c", std::nullopt, std::nullopt});
  CHECK(read_text(dir.path / "a" / "posterior.csv") != read_text(dir.path / "c" / "posterior.csv"));
}

TEST_CASE("discount grid over four values gives sixteen curves") {
  TempDir dir("grid");
  write_levels(dir.path / "d.csv", {"A", "B"}, 10, 3);
  write_file(dir.path / "cfg.json", R"({"version": 1, "seed": 5, "R": 200,
    "data": {"path": "d.csv"},
    "graph": {"labels": ["A", "B"], "parents": {"A": ["B"]}},
    "prior": {"s": 0.001},
    "discount_grid": {"values": [0.9, 0.95, 0.98, 1.0], "baseline": {"delta": 0.98, "beta": 0.98}}})");
  run_command({"discount-grid", dir.path / "cfg.json", std::nullopt, std::nullopt, std::nullopt});
  std::set<std::string> labels;
  for (const auto& r : read_rows(dir.path / "out" / "discount_grid.csv")) {
    labels.insert(r.label);
    if (r.label == "delta=0.97999999999999998;beta=0.97999999999999998" && r.statistic == "relative")
      CHECK(r.value == 0.0);
  }
  CHECK(labels.size() == 16);
}

TEST_CASE("simulate, then every data command runs on the result") {
  TempDir dir("pipeline");
  write_file(dir.path / "sim.json", R"({"version": 1, "seed": 21, "R": 300, "marglik": true,
    "data": {"path": "sim/data.csv", "transform": "none"},
    "graph": {"labels": ["A", "B", "C", "D"], "parents": {"A": ["B"], "B": ["A"], "C": ["A"], "D": ["B", "C"]}},
    "prior": {"v_gamma": 0.5, "s": 0.01}, "discount": {"delta": 0.98, "beta": 0.98},
    "intervention": {"T": "20", "control": ["A", "B"], "experimental": ["C", "D"]},
    "forecast": {"k": 3, "R": 100},
    "factors": {"from": "5"},
    "simulate": {"horizon": 25, "truth": {
      "A": {"theta": [0.1, 0.3], "lambda": 100}, "B": {"theta": [0.0, 0.4], "lambda": 100},
      "C": {"theta": [0.2, 0.5], "lambda": 50}, "D": {"theta": [-0.1, 0.3, 0.3], "lambda": 50}}}})");
  auto sim = run_command({"simulate", dir.path / "sim.json", dir.path / "sim", std::nullopt, std::nullopt});
  CHECK(sim.outputs == std::vector<std::string>{"data.csv", "truth.csv"});
  for (const char* cmd : {"fit", "forecast", "counterfactual", "factors"}) {
    CAPTURE(cmd);
    auto res = run_command({cmd, dir.path / "sim.json", dir.path / cmd, std::nullopt, std::nullopt});
    CHECK(!res.outputs.empty());
    for (const auto& name : res.outputs) CHECK(fs::file_size(dir.path / cmd / name) > 0);
  }
  auto cf = read_rows(dir.path / "counterfactual" / "counterfactual.csv");
  std::set<std::string> labels;
  for (const auto& r : cf) labels.insert(r.label);
  CHECK(labels == std::set<std::string>{"C", "D"});
  auto fac = read_rows(dir.path / "factors" / "factors.csv");
  CHECK(fac.front().t == "5");
}

TEST_CASE("thread count: flag beats environment") {
  CHECK(resolve_threads(3, "5") == 3);
  CHECK(resolve_threads(std::nullopt, "5") == 5);
  CHECK(resolve_threads(std::nullopt, nullptr) == 0);
  CHECK(resolve_threads(std::nullopt, "zero") == 0);
  CHECK_THROWS_AS(resolve_threads(0, nullptr), ConfigError);
}

TEST_CASE("driver errors are typed") {
  TempDir dir("errors");
  write_file(dir.path / "cfg.json", R"({"version": 1, "seed": 1, "graph": {"labels": ["A"], "parents": {}}})");
  CHECK_THROWS_AS(run_command({"plot", dir.path / "cfg.json", std::nullopt, std::nullopt, std::nullopt}), ConfigError);
  CHECK_THROWS_AS(run_command({"fit", dir.path / "cfg.json", std::nullopt, std::nullopt, std::nullopt}), ConfigError);
  CHECK_THROWS_AS(run_command({"fit", dir.path / "missing.json", std::nullopt, std::nullopt, std::nullopt}),
                  ConfigError);
}
