#include "sgdlm/driver.hpp"

#include "sgdlm/export.hpp"
#include "sgdlm/factors.hpp"
#include "sgdlm/marglik.hpp"
#include "sgdlm/simulate.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sgdlm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Context {
  RunConfig cfg;
  ModelSpec spec;
  std::uint64_t seed = 0;
  DriverResult result;
  std::optional<TimeSeriesTable> data;
  std::string data_checksum;
};

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const TimeSeriesTable& need_data(Context& c) {
  if (c.data) return *c.data;
  if (c.cfg.data_path.empty()) throw ConfigError("data.path: required for '" + c.result.manifest["command"].get<std::string>() + "'");
  const auto text = read_text(c.cfg.data_path);
  c.data_checksum = fnv1a_hex(text);
  c.data = select_columns(parse_table(text, c.cfg.transform, c.cfg.data_path.string()), c.cfg.graph.labels());
  if (c.data->y.rows() <= static_cast<Eigen::Index>(c.spec.max_lag()))
    throw IngestionError(c.cfg.data_path.string() + ": not enough rows for the lag structure");
  return *c.data;
}

void emit(Context& c, const std::string& name, const std::vector<StepRecordRow>& rows) {
  write_rows(c.result.out_dir / name, rows);
  c.result.outputs.push_back(name);
}

void emit_json(Context& c, const std::string& name, const json& doc) {
  std::ofstream out(c.result.out_dir / name);
  if (!out) throw IngestionError("cannot write " + (c.result.out_dir / name).string());
  out << doc.dump(2) << '\n';
  c.result.outputs.push_back(name);
}

RunOptions base_run_options(const Context& c) {
  RunOptions ro;
  ro.marglik = c.cfg.marglik;
  return ro;
}

double cumulative_log_pred(const std::vector<StepRecord>& recs) {
  double s = 0.0;
  for (const auto& r : recs)
    if (r.marglik) s += r.marglik->log_pred;
  return s;
}

double min_ess(const std::vector<StepRecord>& recs) {
  double m = 1.0;
  for (const auto& r : recs) m = std::min(m, r.ess_fraction);
  return m;
}

void cmd_fit(Context& c) {
  const auto& d = need_data(c);
  auto fr = run_filter(c.spec, d.y, c.seed, base_run_options(c));
  emit(c, "forecast.csv", forecast_rows(c.spec, fr.records, d.y, d.times));
  emit(c, "posterior.csv", posterior_rows(c.spec, fr.records, d.times));
  if (c.cfg.marglik) emit(c, "marglik.csv", marglik_rows(fr.records, d.times));
  c.result.summary.push_back("fit: " + std::to_string(fr.records.size()) + " steps, min ESS fraction " +
                             fmt(min_ess(fr.records)));
  if (c.cfg.marglik)
    c.result.summary.push_back("cumulative log predictive " + fmt(cumulative_log_pred(fr.records)));
}

void cmd_forecast(Context& c) {
  const auto& d = need_data(c);
  auto fr = run_filter(c.spec, d.y, c.seed, base_run_options(c));
  const std::size_t R = c.cfg.forecast_R.value_or(c.spec.R);
  auto paths = forecast_k(c.spec, fr.last_sample, fr.records.back().posterior, d.y, c.cfg.forecast_k, R, c.seed);
  emit(c, "forecast_paths.csv", path_rows(c.spec, paths, d.times));
  c.result.summary.push_back("forecast: " + std::to_string(c.cfg.forecast_k) + " steps ahead of " +
                             d.times.at(static_cast<std::size_t>(paths.origin)) + ", " + std::to_string(R) +
                             " paths, " + std::to_string(paths.resampled) + " redrawn");
}

void cmd_counterfactual(Context& c) {
  const auto& d = need_data(c);
  const auto iv = resolve_intervention(c.cfg, d.times);
  CounterfactualOptions co;
  co.marglik = c.cfg.marglik;
  for (const auto& label : c.cfg.monitor_excluded) co.monitor_excluded.push_back(time_index(d.times, label));
  auto run = run_counterfactual(c.spec, iv, d.y, c.seed, co);
  emit(c, "counterfactual.csv", counterfactual_rows(c.spec, run, d.y, d.times));
  auto oam = run.pre;
  oam.insert(oam.end(), run.oam.begin(), run.oam.end());
  emit(c, "posterior_oam.csv", posterior_rows(c.spec, oam, d.times));
  emit(c, "posterior_cfm.csv", posterior_rows(c.spec, run.cfm, d.times));
  emit(c, "forecast_oam.csv", forecast_rows(c.spec, oam, d.y, d.times));
  if (co.marglik) {
    auto rows = marglik_rows(oam, d.times, "OAM");
    auto cfm_rows = marglik_rows(run.cfm, d.times, "CFM");
    rows.insert(rows.end(), cfm_rows.begin(), cfm_rows.end());
    emit(c, "marglik.csv", rows);
    emit(c, "monitor.csv", monitor_rows(run.monitor, d.times, "OAM:CFM"));
    if (run.monitor.probability.size() > 0)
      c.result.summary.push_back("monitor: final P(OAM) " + fmt(run.monitor.probability.tail(1)(0)));
  }
  c.result.summary.push_back("counterfactual: intervention at " + d.times.at(static_cast<std::size_t>(iv.T)) + ", " +
                             std::to_string(run.cfm.size()) + " post-intervention steps");
}

void cmd_factors(Context& c) {
  const auto& d = need_data(c);
  auto fr = run_filter(c.spec, d.y, c.seed, base_run_options(c));
  const Eigen::Index from = c.cfg.factor_from ? time_index(d.times, *c.cfg.factor_from) : fr.records.front().t;
  std::vector<Matrix> gammas;
  std::vector<Eigen::Index> times;
  for (const auto& r : fr.records)
    if (r.t >= from) {
      gammas.push_back(r.gamma_mean);
      times.push_back(r.t);
    }
  if (gammas.empty()) throw ConfigError("factors.from: no filtered times at or after it");
  Matrix y(static_cast<Eigen::Index>(times.size()), d.y.cols());
  for (std::size_t i = 0; i < times.size(); ++i) y.row(static_cast<Eigen::Index>(i)) = d.y.row(times[i]);
  std::size_t ref = 0;
  if (c.cfg.factor_reference_time) {
    const auto t = time_index(d.times, *c.cfg.factor_reference_time);
    auto it = std::find(times.begin(), times.end(), t);
    if (it == times.end()) throw ConfigError("factors.reference_time: outside the factor range");
    ref = static_cast<std::size_t>(it - times.begin());
  }
  const auto part = common_parental_sets(c.spec.graph);
  auto fs = factor_series(gammas, times, y, part, std::nullopt, ref);
  emit(c, "factors.csv", factor_rows(c.spec, fs, gammas, d.times));
  c.result.summary.push_back("factors: p = " + std::to_string(fs.phi.rows()) + " over " +
                             std::to_string(times.size()) + " times");
}

void cmd_grid(Context& c) {
  const auto& d = need_data(c);
  if (!c.cfg.grid) throw ConfigError("discount_grid: required for 'discount-grid'");
  const auto grid = square_grid(c.cfg.grid->values);
  std::size_t baseline = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i].delta_phi == c.cfg.grid->baseline_delta && grid[i].beta == c.cfg.grid->baseline_beta) baseline = i;
  if (baseline == grid.size()) throw ConfigError("discount_grid.baseline: not on the grid");
  auto curves = discount_grid(c.spec, d.y, c.seed, grid, baseline);
  emit(c, "discount_grid.csv", grid_rows(curves, d.times));
  std::size_t best = 0;
  for (std::size_t i = 1; i < curves.size(); ++i)
    if (curves[i].cumulative.tail(1)(0) > curves[best].cumulative.tail(1)(0)) best = i;
  c.result.summary.push_back("discount-grid: " + std::to_string(curves.size()) + " curves, best delta " +
                             fmt(curves[best].discount.delta_phi) + " beta " + fmt(curves[best].discount.beta));
}

void cmd_simulate(Context& c) {
  if (!c.cfg.simulation) throw ConfigError("simulate: section required for 'simulate'");
  const auto& sc = *c.cfg.simulation;
  TrueParameters base{sc.theta, sc.lambda};
  std::optional<ShiftConfig> shift = sc.shift;
  std::vector<std::size_t> shifted;
  if (shift)
    for (const auto& l : shift->series) shifted.push_back(*c.spec.graph.index_of(l));
  TruthSchedule truth = [base, shift, shifted](Eigen::Index t) {
    TrueParameters p = base;
    if (shift && t >= shift->at)
      for (auto j : shifted) p.theta[j](0) += shift->size;
    return p;
  };
  const auto lag = static_cast<Eigen::Index>(c.spec.max_lag());
  auto sim = simulate(c.spec, truth, Matrix::Zero(lag, static_cast<Eigen::Index>(c.spec.q())), sc.horizon, c.seed);
  TimeSeriesTable table;
  table.labels = c.spec.graph.labels();
  table.y = sim.y;
  for (Eigen::Index t = 0; t < sim.y.rows(); ++t) table.times.push_back(std::to_string(t));
  write_table(c.result.out_dir / "data.csv", table);
  c.result.outputs.push_back("data.csv");

  std::vector<StepRecordRow> rows;
  for (Eigen::Index h = 0; h < sim.mu.rows(); ++h) {
    const auto& t = table.times[static_cast<std::size_t>(sim.first + h)];
    for (std::size_t j = 0; j < c.spec.q(); ++j) {
      const auto k = static_cast<Eigen::Index>(j);
      const auto& label = c.spec.graph.label(j);
      rows.push_back({t, RowKind::posterior, label, "true_mu", sim.mu(h, k)});
      rows.push_back({t, RowKind::posterior, label, "true_alpha", sim.alpha(h, k)});
      rows.push_back({t, RowKind::posterior, label, "true_lambda", sim.lambda(h, k)});
      for (auto p : c.spec.graph.parents(j))
        rows.push_back({t, RowKind::posterior, label, "true_gamma:" + c.spec.graph.label(p),
                        sim.gamma[static_cast<std::size_t>(h)](k, static_cast<Eigen::Index>(p))});
    }
  }
  emit(c, "truth.csv", rows);
  c.result.summary.push_back("simulate: " + std::to_string(sc.horizon) + " rows of " + std::to_string(c.spec.q()) +
                             " series");
}

json labels_of(const GraphStructure& g, const IndexList& idx) {
  json out = json::array();
  for (auto i : idx) out.push_back(g.label(i));
  return out;
}

void cmd_diagnose(Context& c) {
  const auto& g = c.spec.graph;
  const auto part = common_parental_sets(g);
  json rep;
  rep["q"] = g.q();
  rep["edges"] = g.edge_count();
  rep["acyclic"] = is_acyclic(g);
  json sets = json::array();
  for (const auto& s : part.sets)
    sets.push_back({{"members", labels_of(g, s.members)}, {"children", labels_of(g, s.children)}, {"rank", s.rank}});
  rep["parental_sets"] = sets;
  rep["structural_p"] = part.p;
  IndexList zero_cols;
  for (std::size_t j = 0; j < g.q(); ++j)
    if (g.children(j).empty()) zero_cols.push_back(j);
  rep["zero_gamma_columns"] = labels_of(g, zero_cols);
  json sccs = json::array();
  for (const auto& comp : strongly_connected_components(g))
    if (comp.size() > 1) sccs.push_back(labels_of(g, comp));
  rep["cyclic_components"] = sccs;
  const auto coupled = coupled_series(g);
  IndexList cs;
  for (std::size_t j = 0; j < g.q(); ++j)
    if (coupled[j]) cs.push_back(j);
  rep["coupled_series"] = labels_of(g, cs);
  if (auto b = disjoint_cycle_bound(g)) rep["disjoint_cycle_bound"] = *b;
  const auto moral = moral_pattern(g);
  std::size_t nz = 0;
  for (Eigen::Index i = 0; i < moral.rows(); ++i)
    for (Eigen::Index j = i + 1; j < moral.cols(); ++j) nz += moral(i, j) ? 1 : 0;
  rep["precision_offdiagonal_pairs"] = nz;
  emit_json(c, "diagnose.json", rep);
  c.result.summary.push_back("diagnose: q = " + std::to_string(g.q()) + ", " + std::to_string(part.sets.size()) +
                             " parental sets, structural p = " + std::to_string(part.p) + ", " +
                             std::to_string(zero_cols.size()) + " zero Gamma columns, " + std::to_string(cs.size()) +
                             " coupled series");
}

}  // namespace

const std::vector<std::string>& driver_commands() {
  static const std::vector<std::string> cmds{"fit",           "forecast", "counterfactual", "factors",
                                             "discount-grid", "simulate", "diagnose"};
  return cmds;
}

int resolve_threads(std::optional<int> flag, const char* env_value) {
  if (flag) {
    if (*flag < 1) throw ConfigError("--threads: must be at least 1");
    return *flag;
  }
  if (env_value && *env_value) {
    char* end = nullptr;
    const long v = std::strtol(env_value, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return 0;
}

json graph_to_json(const GraphStructure& g) {
  json parents = json::object();
  for (std::size_t j = 0; j < g.q(); ++j) parents[g.label(j)] = labels_of(g, g.parents(j));
  return {{"labels", g.labels()}, {"parents", parents}};
}

RunConfig load_run_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const IngestionError& e) {
    throw ConfigError(e.what());
  }
  const auto dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": not valid JSON: " + e.what());
  }
  if (doc.is_object() && doc.contains("manifest_version")) {
    if (!doc.contains("config")) throw ConfigError(path.string() + ": manifest has no config");
    return parse_config(doc.at("config").dump(), dir);
  }
  return parse_config(text, dir);
}

DriverResult run_command(const DriverOptions& opt) {
  const auto& cmds = driver_commands();
  if (std::find(cmds.begin(), cmds.end(), opt.command) == cmds.end())
    throw ConfigError("unknown command '" + opt.command + "'");
  Context c;
  c.cfg = load_run_config(opt.config);
  c.seed = opt.seed.value_or(c.cfg.seed);
  c.spec = make_spec(c.cfg);
  const char* env = std::getenv("SGDLM_THREADS");
  const int threads = resolve_threads(opt.threads, env);
  if (threads > 0) omp_set_num_threads(threads);

  c.result.out_dir = opt.out.value_or(c.cfg.output_dir).lexically_normal();
  fs::create_directories(c.result.out_dir);
  c.result.manifest["command"] = opt.command;

  if (opt.command == "fit") cmd_fit(c);
  else if (opt.command == "forecast") cmd_forecast(c);
  else if (opt.command == "counterfactual") cmd_counterfactual(c);
  else if (opt.command == "factors") cmd_factors(c);
  else if (opt.command == "discount-grid") cmd_grid(c);
  else if (opt.command == "simulate") cmd_simulate(c);
  else cmd_diagnose(c);

  json echo = c.cfg.echo;
  echo["seed"] = c.seed;
  echo.erase("output");
  echo.erase("graph_file");
  echo["graph"] = graph_to_json(c.cfg.graph);
  if (!c.cfg.data_path.empty()) echo["data"]["path"] = fs::absolute(c.cfg.data_path).lexically_normal().string();

  json& m = c.result.manifest;
  m["manifest_version"] = kManifestVersion;
  m["program"] = "sgdlm";
  m["version"] = kVersion;
  m["config_version"] = kConfigVersion;
  m["export_schema_version"] = kExportSchemaVersion;
  m["seed"] = c.seed;
  m["threads"] = threads > 0 ? threads : omp_get_max_threads();
  m["config"] = echo;
  if (c.data) {
    m["data"] = {{"path", echo["data"]["path"]},
                 {"transform", to_string(c.cfg.transform)},
                 {"rows", c.data->y.rows()},
                 {"series", c.data->y.cols()},
                 {"first", c.data->times.front()},
                 {"last", c.data->times.back()},
                 {"fnv1a64", c.data_checksum}};
  }
  m["outputs"] = c.result.outputs;
  m["summary"] = c.result.summary;
  std::ofstream out(c.result.out_dir / "manifest.json");
  if (!out) throw IngestionError("cannot write manifest in " + c.result.out_dir.string());
  out << m.dump(2) << '\n';
  return c.result;
}

}  // namespace sgdlm
