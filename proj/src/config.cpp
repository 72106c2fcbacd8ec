#include "sgdlm/config.hpp"

#include <algorithm>
#include <set>

namespace sgdlm {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items())
    if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

double number(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

std::string text(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ConfigError(where + ": expected a string");
}

std::vector<std::string> text_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(text(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::size_t series_index(const GraphStructure& g, const std::string& label, const std::string& where) {
  auto j = g.index_of(label);
  if (!j) throw ConfigError(where + ": unknown series '" + label + "'");
  return *j;
}

void apply_prior(PriorTemplate& p, const json& obj, const std::string& where) {
  check_keys(obj, where, {"m_phi", "v_phi", "m_gamma", "v_gamma", "n", "s", "m_intercept", "v_intercept"});
  p.m_phi = number(obj, "m_phi", p.m_phi, where);
  p.v_phi = number(obj, "v_phi", p.v_phi, where);
  p.m_gamma = number(obj, "m_gamma", p.m_gamma, where);
  p.v_gamma = number(obj, "v_gamma", p.v_gamma, where);
  p.n = number(obj, "n", p.n, where);
  p.s = number(obj, "s", p.s, where);
  if (obj.contains("m_intercept")) p.m_intercept = number(obj, "m_intercept", 0.0, where);
  if (obj.contains("v_intercept")) p.v_intercept = number(obj, "v_intercept", 0.0, where);
  if (p.v_intercept && !(*p.v_intercept > 0)) throw ConfigError(where + ": v_intercept must be positive");
  if (!(p.v_phi > 0 && p.v_gamma > 0 && p.n > 0 && p.s > 0))
    throw ConfigError(where + ": variances, n and s must be positive");
}

void apply_discount(DiscountSpec& d, const json& obj, const std::string& where) {
  check_keys(obj, where, {"delta", "delta_phi", "delta_gamma", "beta"});
  if (obj.contains("delta")) d.delta_phi = d.delta_gamma = number(obj, "delta", 1.0, where);
  d.delta_phi = number(obj, "delta_phi", d.delta_phi, where);
  d.delta_gamma = number(obj, "delta_gamma", d.delta_gamma, where);
  d.beta = number(obj, "beta", d.beta, where);
  try {
    d.validate();
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void apply_design(SeriesDesign& d, std::size_t self, const GraphStructure& g, const json& obj,
                  const std::string& where) {
  check_keys(obj, where, {"intercept", "own_lags", "lags"});
  if (obj.contains("intercept")) {
    if (!obj.at("intercept").is_boolean()) throw ConfigError(where + ".intercept: expected a boolean");
    d.intercept = obj.at("intercept").get<bool>();
  }
  if (obj.contains("own_lags") || obj.contains("lags")) d.lags.clear();
  if (obj.contains("own_lags")) {
    const auto& v = obj.at("own_lags");
    if (!v.is_array()) throw ConfigError(where + ".own_lags: expected an array");
    for (const auto& l : v) {
      if (!l.is_number_integer() || l.get<long long>() < 1) throw ConfigError(where + ".own_lags: lags must be >= 1");
      d.lags.push_back({self, static_cast<std::size_t>(l.get<long long>())});
    }
  }
  if (obj.contains("lags")) {
    const auto& v = obj.at("lags");
    if (!v.is_array()) throw ConfigError(where + ".lags: expected an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string w = where + ".lags[" + std::to_string(i) + "]";
      check_keys(v[i], w, {"series", "lag"});
      if (!v[i].contains("series") || !v[i].contains("lag")) throw ConfigError(w + ": needs series and lag");
      const auto& lag = v[i].at("lag");
      if (!lag.is_number_integer() || lag.get<long long>() < 1) throw ConfigError(w + ".lag: must be >= 1");
      d.lags.push_back({series_index(g, text(v[i].at("series"), w + ".series"), w),
                        static_cast<std::size_t>(lag.get<long long>())});
    }
  }
}

}  // namespace

RunConfig parse_config(const std::string& doc, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(doc);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config",
             {"version", "seed", "data", "graph", "graph_file", "design", "prior", "discount", "series", "R",
              "reject_explosive", "marglik", "intervention", "monitor_excluded", "discount_grid", "forecast",
              "factors", "simulate", "output"});
  RunConfig cfg;
  cfg.echo = root;
  cfg.base_dir = base_dir;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  if (!root.contains("version") || !root.at("version").is_number_integer())
    throw ConfigError("config.version: required integer");
  if (root.at("version").get<int>() != kConfigVersion)
    throw ConfigError("config.version: unsupported version " + root.at("version").dump() + " (this build reads " +
                      std::to_string(kConfigVersion) + ")");
  if (!root.contains("seed") || !root.at("seed").is_number_unsigned())
    throw ConfigError("config.seed: required non-negative integer");
  cfg.seed = root.at("seed").get<std::uint64_t>();

  if (root.contains("data")) {
    const auto& d = root.at("data");
    check_keys(d, "data", {"path", "transform"});
    if (!d.contains("path")) throw ConfigError("data.path: required");
    cfg.data_path = resolve(text(d.at("path"), "data.path"));
    if (d.contains("transform")) cfg.transform = parse_transform(text(d.at("transform"), "data.transform"));
  }

  try {
    if (root.contains("graph") == root.contains("graph_file"))
      throw ConfigError("config: give exactly one of graph and graph_file");
    const std::string gtext =
        root.contains("graph") ? root.at("graph").dump() : read_text(resolve(text(root.at("graph_file"), "graph_file")));
    cfg.graph = graph_from_json_text(gtext);
  } catch (const StructuralError& e) {
    throw ConfigError(std::string("graph: ") + e.what());
  } catch (const IngestionError& e) {
    throw ConfigError(std::string("graph_file: ") + e.what());
  }
  const std::size_t q = cfg.graph.q();

  SeriesDesign design_t;
  PriorTemplate prior_t;
  DiscountSpec discount_t;
  if (root.contains("prior")) apply_prior(prior_t, root.at("prior"), "prior");
  if (root.contains("discount")) apply_discount(discount_t, root.at("discount"), "discount");
  cfg.prior.assign(q, prior_t);
  cfg.discount.assign(q, discount_t);
  cfg.design.resize(q);
  for (std::size_t j = 0; j < q; ++j) {
    cfg.design[j] = design_t;
    if (root.contains("design")) apply_design(cfg.design[j], j, cfg.graph, root.at("design"), "design");
  }
  if (root.contains("series")) {
    const auto& s = root.at("series");
    if (!s.is_object()) throw ConfigError("series: expected an object");
    for (const auto& [label, obj] : s.items()) {
      const std::string w = "series." + label;
      const auto j = series_index(cfg.graph, label, w);
      check_keys(obj, w, {"design", "prior", "discount"});
      if (obj.contains("design")) apply_design(cfg.design[j], j, cfg.graph, obj.at("design"), w + ".design");
      if (obj.contains("prior")) apply_prior(cfg.prior[j], obj.at("prior"), w + ".prior");
      if (obj.contains("discount")) apply_discount(cfg.discount[j], obj.at("discount"), w + ".discount");
    }
  }

  if (root.contains("R")) {
    if (!root.at("R").is_number_unsigned() || root.at("R").get<std::size_t>() < 1)
      throw ConfigError("R: expected a positive integer");
    cfg.R = root.at("R").get<std::size_t>();
  }
  for (const char* key : {"reject_explosive", "marglik"}) {
    if (!root.contains(key)) continue;
    if (!root.at(key).is_boolean()) throw ConfigError(std::string(key) + ": expected a boolean");
    (std::string(key) == "marglik" ? cfg.marglik : cfg.reject_explosive) = root.at(key).get<bool>();
  }

  if (root.contains("intervention")) {
    const auto& iv = root.at("intervention");
    check_keys(iv, "intervention", {"T", "control", "experimental", "delta_star", "beta_star"});
    for (const char* k : {"T", "control", "experimental"})
      if (!iv.contains(k)) throw ConfigError(std::string("intervention.") + k + ": required");
    InterventionConfig ic;
    ic.T = text(iv.at("T"), "intervention.T");
    ic.control = text_list(iv.at("control"), "intervention.control");
    ic.experimental = text_list(iv.at("experimental"), "intervention.experimental");
    ic.delta_star = number(iv, "delta_star", ic.delta_star, "intervention");
    if (iv.contains("beta_star")) ic.beta_star = number(iv, "beta_star", 1.0, "intervention");
    for (const auto& l : ic.control) series_index(cfg.graph, l, "intervention.control");
    for (const auto& l : ic.experimental) series_index(cfg.graph, l, "intervention.experimental");
    cfg.intervention = ic;
  }
  if (root.contains("monitor_excluded")) cfg.monitor_excluded = text_list(root.at("monitor_excluded"), "monitor_excluded");

  if (root.contains("discount_grid")) {
    const auto& g = root.at("discount_grid");
    check_keys(g, "discount_grid", {"values", "baseline"});
    GridConfig gc;
    if (!g.contains("values") || !g.at("values").is_array() || g.at("values").empty())
      throw ConfigError("discount_grid.values: required non-empty array");
    for (const auto& v : g.at("values")) {
      if (!v.is_number()) throw ConfigError("discount_grid.values: expected numbers");
      gc.values.push_back(v.get<double>());
    }
    gc.baseline_delta = gc.baseline_beta = gc.values.back();
    if (g.contains("baseline")) {
      const auto& b = g.at("baseline");
      check_keys(b, "discount_grid.baseline", {"delta", "beta"});
      gc.baseline_delta = number(b, "delta", gc.baseline_delta, "discount_grid.baseline");
      gc.baseline_beta = number(b, "beta", gc.baseline_beta, "discount_grid.baseline");
    }
    auto in = [&](double v) { return std::find(gc.values.begin(), gc.values.end(), v) != gc.values.end(); };
    if (!in(gc.baseline_delta) || !in(gc.baseline_beta))
      throw ConfigError("discount_grid.baseline: must be one of the grid points");
    cfg.grid = gc;
  }

  if (root.contains("forecast")) {
    const auto& f = root.at("forecast");
    check_keys(f, "forecast", {"k", "R"});
    if (f.contains("k")) {
      if (!f.at("k").is_number_unsigned() || f.at("k").get<std::size_t>() < 1)
        throw ConfigError("forecast.k: expected a positive integer");
      cfg.forecast_k = f.at("k").get<std::size_t>();
    }
    if (f.contains("R")) {
      if (!f.at("R").is_number_unsigned() || f.at("R").get<std::size_t>() < 1)
        throw ConfigError("forecast.R: expected a positive integer");
      cfg.forecast_R = f.at("R").get<std::size_t>();
    }
  }

  if (root.contains("factors")) {
    const auto& f = root.at("factors");
    check_keys(f, "factors", {"reference_time", "from"});
    if (f.contains("reference_time")) cfg.factor_reference_time = text(f.at("reference_time"), "factors.reference_time");
    if (f.contains("from")) cfg.factor_from = text(f.at("from"), "factors.from");
  }

  if (root.contains("simulate")) {
    const auto& s = root.at("simulate");
    check_keys(s, "simulate", {"horizon", "truth", "shift"});
    SimulationConfig sc;
    if (s.contains("horizon")) {
      if (!s.at("horizon").is_number_unsigned()) throw ConfigError("simulate.horizon: expected a positive integer");
      sc.horizon = s.at("horizon").get<std::size_t>();
    }
    if (!s.contains("truth") || !s.at("truth").is_object()) throw ConfigError("simulate.truth: required object");
    sc.theta.resize(q);
    sc.lambda = Vector::Ones(static_cast<Eigen::Index>(q));
    std::vector<bool> seen(q, false);
    for (const auto& [label, obj] : s.at("truth").items()) {
      const std::string w = "simulate.truth." + label;
      const auto j = series_index(cfg.graph, label, w);
      check_keys(obj, w, {"theta", "lambda"});
      if (!obj.contains("theta") || !obj.at("theta").is_array()) throw ConfigError(w + ".theta: required array");
      const std::size_t d = cfg.design[j].n_phi() + cfg.graph.parents(j).size();
      if (obj.at("theta").size() != d)
        throw ConfigError(w + ".theta: expected " + std::to_string(d) + " entries (phi then parental coefficients)");
      sc.theta[j].resize(static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < d; ++i) {
        if (!obj.at("theta")[i].is_number()) throw ConfigError(w + ".theta: expected numbers");
        sc.theta[j](static_cast<Eigen::Index>(i)) = obj.at("theta")[i].get<double>();
      }
      sc.lambda(static_cast<Eigen::Index>(j)) = number(obj, "lambda", 1.0, w);
      if (!(sc.lambda(static_cast<Eigen::Index>(j)) > 0.0)) throw ConfigError(w + ".lambda: must be positive");
      seen[j] = true;
    }
    for (std::size_t j = 0; j < q; ++j)
      if (!seen[j]) throw ConfigError("simulate.truth: missing series '" + cfg.graph.label(j) + "'");
    if (s.contains("shift")) {
      const auto& sh = s.at("shift");
      check_keys(sh, "simulate.shift", {"at", "series", "size"});
      ShiftConfig shc;
      if (!sh.contains("at") || !sh.at("at").is_number_unsigned()) throw ConfigError("simulate.shift.at: required row");
      shc.at = sh.at("at").get<Eigen::Index>();
      if (!sh.contains("series")) throw ConfigError("simulate.shift.series: required");
      shc.series = text_list(sh.at("series"), "simulate.shift.series");
      for (const auto& l : shc.series) {
        const auto j = series_index(cfg.graph, l, "simulate.shift.series");
        if (!cfg.design[j].intercept) throw ConfigError("simulate.shift: series '" + l + "' has no intercept");
      }
      shc.size = number(sh, "size", 0.0, "simulate.shift");
      sc.shift = shc;
    }
    cfg.simulation = sc;
  }

  if (root.contains("output")) cfg.output_dir = resolve(text(root.at("output"), "output"));
  else cfg.output_dir = base_dir / "out";
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string doc;
  try {
    doc = read_text(path);
  } catch (const IngestionError& e) {
    throw ConfigError(e.what());
  }
  auto dir = path.parent_path();
  return parse_config(doc, dir.empty() ? std::filesystem::path(".") : dir);
}

NGPosterior make_prior(const PriorTemplate& p, std::size_t n_phi, std::size_t n_gamma, bool intercept) {
  const auto d = static_cast<Eigen::Index>(n_phi + n_gamma);
  const auto k = static_cast<Eigen::Index>(n_phi);
  NGPosterior ng;
  ng.m = Vector::Constant(d, p.m_gamma);
  ng.m.head(k).setConstant(p.m_phi);
  Vector v = Vector::Constant(d, p.v_gamma);
  v.head(k).setConstant(p.v_phi);
  if (intercept && k > 0) {
    ng.m(0) = p.m_intercept.value_or(p.m_phi);
    v(0) = p.v_intercept.value_or(p.v_phi);
  }
  ng.M = v.asDiagonal();
  ng.n = p.n;
  ng.s = p.s;
  ng.n_phi = n_phi;
  return ng;
}

ModelSpec make_spec(const RunConfig& cfg) {
  ModelSpec spec;
  spec.graph = cfg.graph;
  spec.design = cfg.design;
  spec.discount = cfg.discount;
  spec.R = cfg.R;
  spec.reject_explosive = cfg.reject_explosive;
  for (std::size_t j = 0; j < cfg.graph.q(); ++j)
    spec.prior.push_back(make_prior(cfg.prior[j], cfg.design[j].n_phi(), cfg.graph.parents(j).size(),
                                    cfg.design[j].intercept));
  spec.validate();
  return spec;
}

Eigen::Index time_index(const std::vector<std::string>& times, const std::string& label) {
  auto it = std::find(times.begin(), times.end(), label);
  if (it == times.end()) throw ConfigError("time '" + label + "' is not in the data");
  return it - times.begin();
}

InterventionSpec resolve_intervention(const RunConfig& cfg, const std::vector<std::string>& times) {
  if (!cfg.intervention) throw ConfigError("config has no intervention");
  const auto& ic = *cfg.intervention;
  InterventionSpec iv;
  iv.T = time_index(times, ic.T);
  for (const auto& l : ic.control) iv.control.push_back(*cfg.graph.index_of(l));
  for (const auto& l : ic.experimental) iv.experimental.push_back(*cfg.graph.index_of(l));
  std::sort(iv.control.begin(), iv.control.end());
  std::sort(iv.experimental.begin(), iv.experimental.end());
  iv.oam_delta_star = ic.delta_star;
  iv.oam_beta_star = ic.beta_star;
  iv.validate(cfg.graph.q());
  return iv;
}

}  // namespace sgdlm
