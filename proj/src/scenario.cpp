#include "supermart/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace supermart {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------- config

struct Analyses {
  std::vector<double> p{1.2};
  std::vector<double> gamma{1.0};
  std::vector<int> F;  // 0-based; empty means {0}
  double T0 = 10.0;
  double T1 = 10.0;
  std::vector<std::string> functionals{"M", "A", "Atilde", "C", "Ctilde", "window_avg"};
  std::int64_t functional_paths = 100;
  std::vector<double> thresholds{0.1, 0.3, 1.0, 3.0, 10.0};
  std::vector<double> T;       // empty: horizon/8, horizon/4, 3 horizon/8
  std::vector<int> window_n;   // empty: 0 .. horizon/2
  int lp_points = 10;
};

struct Scenario {
  json model_json;
  bool gw = false;
  Model model;
  GWModel gw_model;
  std::string sim_kind;
  SpineConfig sim;
  int generations = 20;
  Analyses analyses;
  std::string output;
  std::uint64_t seed = 0;
  std::uint64_t hash = 0;
};

double num(const json& obj, const char* key, double fallback, const std::string& ptr) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) throw SchemaError(ptr + "/" + key, "expected a number");
  return it->get<double>();
}

std::int64_t integer(const json& obj, const char* key, std::int64_t fallback,
                     const std::string& ptr) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) throw SchemaError(ptr + "/" + key, "expected an integer");
  return it->get<std::int64_t>();
}

std::vector<double> num_list(const json& obj, const char* key, std::vector<double> fallback,
                             const std::string& ptr) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_array()) throw SchemaError(ptr + "/" + key, "expected an array");
  std::vector<double> out;
  for (std::size_t k = 0; k < it->size(); ++k) {
    if (!(*it)[k].is_number())
      throw SchemaError(ptr + "/" + key + "/" + std::to_string(k), "expected a number");
    out.push_back((*it)[k].get<double>());
  }
  return out;
}

Scenario parse_scenario(const json& config, const RunOverrides& ov) {
  if (!config.is_object()) throw SchemaError("", "config must be a JSON object");
  Scenario sc;

  if (auto it = config.find("model"); it != config.end()) {
    sc.model_json = *it;
  } else if (auto jt = config.find("model_path"); jt != config.end()) {
    if (!jt->is_string()) throw SchemaError("/model_path", "expected a string");
    fs::path p = jt->get<std::string>();
    if (p.is_relative()) p = fs::path(ov.base_dir) / p;
    sc.model_json = read_json_file(p.string());
  } else {
    throw SchemaError("/model", "missing required key \"model\" (or \"model_path\")");
  }
  sc.gw = is_gw_json(sc.model_json);
  try {
    if (sc.gw)
      sc.gw_model = gw_from_json(sc.model_json);
    else
      sc.model = model_from_json(sc.model_json);
  } catch (const SchemaError& e) {
    throw SchemaError("/model" + e.pointer(), std::string(e.what()).substr(0, std::string(e.what()).rfind(" at ")));
  }

  if (ov.seed) {
    sc.seed = *ov.seed;
  } else {
    auto it = config.find("seed");
    if (it == config.end()) throw SchemaError("/seed", "missing required key \"seed\"");
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0))
      throw SchemaError("/seed", "expected a non-negative integer");
    sc.seed = it->get<std::uint64_t>();
  }

  const json sim = config.contains("sim") ? config["sim"] : json::object();
  if (!sim.is_object()) throw SchemaError("/sim", "expected an object");
  sc.sim_kind = sc.gw ? "gw" : "csbp";
  if (auto it = sim.find("kind"); it != sim.end()) {
    if (!it->is_string()) throw SchemaError("/sim/kind", "expected a string");
    sc.sim_kind = it->get<std::string>();
  }
  if (sc.sim_kind != "gw" && sc.sim_kind != "csbp" && sc.sim_kind != "spine")
    throw SchemaError("/sim/kind", "expected one of gw, csbp, spine");
  if ((sc.sim_kind == "gw") != sc.gw)
    throw SchemaError("/sim/kind", "simulation kind does not match the model kind");
  auto& s = sc.sim;
  s.dt = ov.dt.value_or(num(sim, "dt", 1e-2, "/sim"));
  s.horizon = ov.horizon.value_or(num(sim, "horizon", 4.0, "/sim"));
  s.epsilon = num(sim, "epsilon", 0.0, "/sim");
  s.paths = ov.paths.value_or(integer(sim, "paths", 1000, "/sim"));
  s.record_stride = static_cast<int>(integer(sim, "record_stride", 1, "/sim"));
  s.log_jumps = sim.value("log_jumps", true);
  s.delta = num(sim, "delta", 1e-3, "/sim");
  s.delta_m = num(sim, "delta_m", 1e-2, "/sim");
  s.master_seed = sc.seed;
  s.threads = ov.threads;
  sc.generations = static_cast<int>(integer(sim, "generations", 20, "/sim"));
  if (s.paths < 1) throw SchemaError("/sim/paths", "expected a positive integer");
  if (auto it = sim.find("x0"); it != sim.end() && !sc.gw) {
    const auto x0 = num_list(sim, "x0", {}, "/sim");
    if (static_cast<int>(x0.size()) != sc.model.dim())
      throw SchemaError("/sim/x0", "expected one entry per type");
    s.x0 = Eigen::Map<const Eigen::VectorXd>(x0.data(), x0.size());
  }

  const json an = config.contains("analyses") ? config["analyses"] : json::object();
  if (!an.is_object()) throw SchemaError("/analyses", "expected an object");
  auto& a = sc.analyses;
  a.p = num_list(an, "p", a.p, "/analyses");
  a.gamma = num_list(an, "gamma", a.gamma, "/analyses");
  for (double p : a.p)
    if (!(p > 1.0 && p <= 2.0)) throw SchemaError("/analyses/p", "entries must lie in (1, 2]");
  for (double g : a.gamma)
    if (!(g > 0.0)) throw SchemaError("/analyses/gamma", "entries must be positive");
  const int d = sc.gw ? 1 : sc.model.dim();
  for (double x : num_list(an, "F", {1.0}, "/analyses")) {
    const int i = static_cast<int>(x);
    if (i != x || i < 1 || i > d) throw SchemaError("/analyses/F", "unknown type index");
    a.F.push_back(i - 1);
  }
  a.T0 = num(an, "T0", a.T0, "/analyses");
  a.T1 = num(an, "T1", a.T1, "/analyses");
  if (auto it = an.find("functionals"); it != an.end()) {
    if (!it->is_array()) throw SchemaError("/analyses/functionals", "expected an array");
    a.functionals.clear();
    for (std::size_t k = 0; k < it->size(); ++k) {
      const auto& v = (*it)[k];
      static const std::vector<std::string> known{"M", "A", "Atilde", "C", "Ctilde", "window_avg"};
      if (!v.is_string() || std::find(known.begin(), known.end(), v.get<std::string>()) == known.end())
        throw SchemaError("/analyses/functionals/" + std::to_string(k), "unknown functional kind");
      a.functionals.push_back(v.get<std::string>());
    }
  }
  a.functional_paths = integer(an, "functional_paths", a.functional_paths, "/analyses");
  a.thresholds = num_list(an, "thresholds", a.thresholds, "/analyses");
  a.T = num_list(an, "T", {}, "/analyses");
  for (double n : num_list(an, "window_n", {}, "/analyses")) a.window_n.push_back(static_cast<int>(n));
  a.lp_points = static_cast<int>(integer(an, "lp_points", a.lp_points, "/analyses"));

  if (ov.out) {
    sc.output = *ov.out;
  } else if (auto it = config.find("output"); it != config.end() && it->is_string()) {
    sc.output = it->get<std::string>();
  } else {
    throw SchemaError("/output", "missing required key \"output\"");
  }

  // The hash covers everything that determines the artifacts.
  json canon = {{"model", sc.model_json},
                {"sim", {{"kind", sc.sim_kind}, {"dt", s.dt}, {"horizon", s.horizon},
                         {"epsilon", s.epsilon}, {"paths", s.paths},
                         {"record_stride", s.record_stride}, {"log_jumps", s.log_jumps},
                         {"delta", s.delta}, {"delta_m", s.delta_m},
                         {"generations", sc.generations}}},
                {"analyses", an},
                {"seed", sc.seed}};
  if (s.x0.size()) canon["sim"]["x0"] = num_list(sim, "x0", {}, "/sim");
  sc.hash = fnv1a64(canon.dump());
  return sc;
}

// ---------------------------------------------------------------- helpers

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json with_meta(json body, const Scenario& sc) {
  json out = json::object();
  out["meta"] = {{"tool", "supermart"}, {"version", kVersion},
                 {"config_hash", hash_hex(sc.hash)},
                 {"seed", sc.seed}};
  out["data"] = std::move(body);
  return out;
}

std::vector<double> default_grid(const std::vector<double>& times, double horizon, int points) {
  std::vector<double> candidates;
  for (double t : times)
    if (t >= 0.1 * horizon - 1e-9 && t <= 0.5 * horizon + 1e-9 && t > 0.0) candidates.push_back(t);
  if (candidates.empty()) return {};
  std::vector<double> grid;
  const int n = std::min<int>(points, static_cast<int>(candidates.size()));
  for (int k = 0; k < n; ++k) {
    const std::size_t idx = n == 1 ? candidates.size() - 1
                                   : static_cast<std::size_t>(std::llround(
                                         double(k) * (candidates.size() - 1) / (n - 1)));
    if (grid.empty() || candidates[idx] != grid.back()) grid.push_back(candidates[idx]);
  }
  return grid;
}

std::vector<double> default_T(const Analyses& a, double horizon) {
  if (!a.T.empty()) return a.T;
  return {horizon / 8.0, horizon / 4.0, 3.0 * horizon / 8.0};
}

std::string pair_verdict(bool predicted_holds, bool predicted_fails, const std::string& observed) {
  if (observed == "inconclusive") return "inconclusive";
  if (predicted_holds) return observed == "holds" ? "consistent" : "inconsistent";
  if (predicted_fails) return observed == "fails-consistent" ? "consistent" : "inconsistent";
  return "not-applicable";
}

json clause(const std::string& name, json parameter, json predicted, json observed,
            const std::string& verdict) {
  return {{"clause", name}, {"parameter", parameter}, {"predicted", predicted},
          {"observed", observed}, {"verdict", verdict}};
}

// Monte Carlo mean and standard error.
std::pair<double, double> mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = stable_sum(v) / n;
  std::vector<double> sq;
  sq.reserve(v.size());
  for (double x : v) sq.push_back((x - mean) * (x - mean));
  return {mean, std::sqrt(stable_sum(sq) / std::max(1.0, n - 1.0) / n)};
}

// ---------------------------------------------------------------- run

int run_csbp(const Scenario& sc, std::ostream& log) {
  const fs::path out = sc.output;
  const std::string meta = meta_line(sc.hash, sc.seed);
  const auto& model = sc.model;
  const auto& a = sc.analyses;

  const auto validation = validate_model(model);
  write_text_file((out / "model.json").string(),
                  dump(with_meta({{"model", model_to_json(model)},
                                  {"validation", validation_to_json(validation)}},
                                 sc)));
  if (!validation.ok) {
    for (const auto& f : validation.failures) log << "model invalid: " << f.message << "\n";
    return kExitModel;
  }
  Eigentriple eig;
  try {
    eig = principal_eigentriple(model);
  } catch (const ModelError& e) {
    log << "model invalid: " << e.what() << "\n";
    return kExitModel;
  }
  write_text_file((out / "eigen.json").string(), dump(with_meta(eigen_to_json(model, eig), sc)));

  const auto report = evaluate_criteria(model, eig, a.p, a.gamma, a.F, a.T0, a.T1);
  write_text_file((out / "criteria.json").string(), dump(with_meta(criteria_to_json(report), sc)));

  json warnings = json::array();
  std::vector<PathRecord> paths;
  if (sc.sim_kind == "spine") {
    const auto diag = spine_diagnostics(model, sc.sim);
    if (diag.budget_exceeded) {
      log << "warning: " << diag.warning << "\n";
      warnings.push_back(diag.warning);
    }
    paths = simulate_spine(model, eig, sc.sim);
  } else {
    paths = simulate_csbp(model, eig, sc.sim);
  }
  {
    std::ostringstream os;
    write_paths_csv(os, paths, meta);
    write_text_file((out / "paths.csv").string(), os.str());
  }
  if (sc.sim.log_jumps) {
    std::ostringstream os;
    write_jumps_csv(os, paths, meta);
    write_text_file((out / "jumps.csv").string(), os.str());
  }
  std::int64_t flagged = 0;
  for (const auto& p : paths) flagged += p.flagged;
  const double flagged_fraction = static_cast<double>(flagged) / paths.size();

  // Functionals for the first paths.
  {
    std::ostringstream os;
    os << meta << "\npath_id,kind,t,value\n";
    const auto limit = std::min<std::int64_t>(a.functional_paths, paths.size());
    auto has = [&](const char* k) {
      return std::find(a.functionals.begin(), a.functionals.end(), k) != a.functionals.end();
    };
    for (std::int64_t i = 0; i < limit; ++i) {
      const auto& path = paths[i];
      const double minf = estimate_Minfty(path);
      std::vector<FunctionalCurve> curves;
      if (has("M")) curves.push_back(m_curve(path));
      for (double p : a.p) {
        if (has("A")) curves.push_back(a_functional(path, eig, minf, p / (p - 1.0)));
        if (has("Atilde")) curves.push_back(a_tilde_functional(path, eig, p));
      }
      for (double g : a.gamma) {
        auto [c, ct] = c_functionals(path, eig, minf, g);
        if (has("C")) curves.push_back(c);
        if (has("Ctilde")) curves.push_back(ct);
      }
      if (has("window_avg")) {
        FunctionalCurve w{FunctionalKind::window_avg, 0.0, {}, {}};
        for (int n = 0; n + 1 <= path.times.back() + 1e-9; ++n) {
          w.grid.push_back(n);
          w.values.push_back(window_average(path, eig, n, a.F));
        }
        curves.push_back(w);
      }
      write_functionals_csv(os, path.path_id, curves);
    }
    write_text_file((out / "functionals.csv").string(), os.str());
  }

  // Rates.
  const Ensemble ens = ensemble_from_paths(paths, eig.lambda);
  json rates = json::object();
  json clauses = json::array();
  std::ostringstream curve_csv;
  curve_csv << meta << "\np,t,value,stderr\n";
  const auto grid = default_grid(ens.times, ens.horizon, a.lp_points);
  const auto Ts = default_T(a, ens.horizon);

  {
    std::vector<double> m0, minf;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      m0.push_back(ens.M[i].front());
      minf.push_back(ens.Minf[i]);
    }
    const auto [mean0, se0] = mean_se(m0);
    const auto [mean_inf, se_inf] = mean_se(minf);
    const double gap = std::abs(mean_inf - mean0);
    const double z = gap <= 1e-12 * std::abs(mean0) ? 0.0 : se_inf > 0.0 ? gap / se_inf : kNaN;
    const bool ok = report.nondegenerate ? (z <= 4.0) : (mean_inf < mean0);
    clauses.push_back(clause("nondegeneracy", nullptr, {{"llogl", extended(report.llogl)},
                                                        {"mean_limit", mean0}},
                             {{"mean_limit", mean_inf}, {"stderr", se_inf}}, ok ? "consistent" : "inconsistent"));
  }

  json lp = json::array(), as = json::array();
  for (const auto& e : report.p) {
    json fit_json = nullptr;
    std::string lp_verdict = "not-applicable";
    if (!grid.empty() && ens.size() > 1) {
      const auto curve = lp_curve(ens, e.p, grid, sc.seed);
      for (std::size_t k = 0; k < curve.t.size(); ++k)
        curve_csv << format_double(e.p) << ',' << format_double(curve.t[k]) << ','
                  << format_double(curve.value[k]) << ',' << format_double(curve.stderr_[k]) << '\n';
      const auto fit = fit_exponential(curve, e.finite ? e.lp_limit_exponent : kNaN,
                                       static_cast<std::int64_t>(ens.size()));
      fit_json = fit_to_json(fit);
      if (e.finite) lp_verdict = fit.verdict;
    }
    lp.push_back({{"p", e.p}, {"fit", fit_json}});
    clauses.push_back(clause("lp_rate", e.p, e.finite ? json(e.lp_limit_exponent) : json(nullptr),
                             fit_json.is_null() ? json(nullptr) : fit_json["exponent"], lp_verdict));

    const auto ex = as_rate_check(ens, e.q, a.thresholds, Ts);
    as.push_back({{"p", e.p}, {"q", e.q}, {"check", exceedance_to_json(ex)}});
    const std::string predicted = e.as_rate_holds ? "holds" : e.as_rate_fails_expected ? "fails" : "unknown";
    clauses.push_back(clause("as_exponential_rate", e.p, predicted, ex.verdict,
                             pair_verdict(e.as_rate_holds, e.as_rate_fails_expected, ex.verdict)));
  }
  rates["lp"] = lp;
  rates["as_rate"] = as;

  json poly = json::array();
  for (const auto& e : report.gamma) {
    const auto pr = poly_rate_check(ens, e.gamma, a.thresholds, Ts);
    poly.push_back({{"gamma", e.gamma}, {"pointwise", exceedance_to_json(pr.pointwise)},
                    {"series", exceedance_to_json(pr.series)}});
    const std::string predicted = e.holds ? "holds" : e.poly_fails_expected ? "fails" : "unknown";
    clauses.push_back(clause("as_polynomial_rate", e.gamma, predicted, pr.pointwise.verdict,
                             pair_verdict(e.holds, e.poly_fails_expected, pr.pointwise.verdict)));
    const std::string spred = e.holds ? "holds" : e.series_fails_expected ? "fails" : "unknown";
    clauses.push_back(clause("polynomial_series", e.gamma, spred, pr.series.verdict,
                             pair_verdict(e.holds, e.series_fails_expected, pr.series.verdict)));
  }
  rates["poly_rate"] = poly;

  std::vector<int> ns = a.window_n;
  if (ns.empty())
    for (int n = 0; n <= static_cast<int>(ens.horizon / 2.0) && n + 1 <= ens.horizon; ++n) ns.push_back(n);
  const auto wl = window_law_check(paths, eig, a.F, ns);
  rates["window_law"] = window_law_to_json(wl);
  clauses.push_back(clause("window_law", nullptr, wl.target,
                           wl.mad.empty() ? json(nullptr) : extended(wl.mad.back()), wl.verdict));

  write_text_file((out / "rates.json").string(), dump(with_meta(rates, sc)));
  write_text_file((out / "rates_curve.csv").string(), curve_csv.str());

  const int code = flagged_fraction > 0.1 ? kExitNumerical : kExitOk;
  json summary = {{"exit_code", code}, {"flagged_fraction", flagged_fraction},
                  {"paths", paths.size()}, {"clauses", clauses}, {"warnings", warnings}};
  write_text_file((out / "summary.json").string(), dump(with_meta(summary, sc)));
  if (code == kExitNumerical) log << "numerical failure: " << flagged << " flagged paths\n";
  return code;
}

int run_gw(const Scenario& sc, std::ostream& log) {
  const fs::path out = sc.output;
  const std::string meta = meta_line(sc.hash, sc.seed);
  const auto& gw = sc.gw_model;
  const auto& a = sc.analyses;
  write_text_file((out / "model.json").string(), dump(with_meta({{"model", gw_to_json(gw)}}, sc)));
  double total = 0.0;
  if (gw.kind == GWModel::Kind::finite) {
    for (double p : gw.pmf) {
      if (!(p >= 0.0)) {
        log << "model invalid: negative probability\n";
        return kExitModel;
      }
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      log << "model invalid: probabilities sum to " << format_double(total) << "\n";
      return kExitModel;
    }
  } else if (!(gw.alpha > 1.0 && gw.alpha < 2.0)) {
    log << "model invalid: power-law alpha must lie in (1, 2)\n";
    return kExitModel;
  }
  if (!(gw.mean() > 1.0)) {
    log << "model invalid: offspring mean " << gw.mean() << " is not supercritical\n";
    return kExitModel;
  }
  const auto crit = gw_criteria(gw, a.p, a.gamma);
  write_text_file((out / "criteria.json").string(), dump(with_meta(gw_criteria_to_json(crit), sc)));

  const auto ens_raw = simulate_gw(gw, sc.generations, sc.sim.paths, sc.seed, sc.sim.threads);
  {
    std::ostringstream os;
    write_gw_csv(os, ens_raw, meta);
    write_text_file((out / "paths.csv").string(), os.str());
  }
  const Ensemble ens = ensemble_from_gw(ens_raw);
  const double flagged_fraction = static_cast<double>(ens.excluded) / ens_raw.paths();
  std::vector<double> grid;
  for (int n = 1; n <= sc.generations / 2; ++n) grid.push_back(n);
  json rates = json::object(), clauses = json::array(), lp = json::array();
  std::ostringstream curve_csv;
  curve_csv << meta << "\np,t,value,stderr\n";
  const auto Ts = default_T(a, ens.horizon);
  for (const auto& e : crit.p) {
    json fit_json = nullptr;
    std::string verdict = "not-applicable";
    if (grid.size() >= 3 && ens.size() > 1) {
      const auto curve = lp_curve(ens, e.p, grid, sc.seed);
      for (std::size_t k = 0; k < curve.t.size(); ++k)
        curve_csv << format_double(e.p) << ',' << format_double(curve.t[k]) << ','
                  << format_double(curve.value[k]) << ',' << format_double(curve.stderr_[k]) << '\n';
      const auto fit = fit_exponential(curve, e.finite ? e.exponent : kNaN,
                                       static_cast<std::int64_t>(ens.size()));
      fit_json = fit_to_json(fit);
      if (e.finite) verdict = fit.verdict;
    }
    lp.push_back({{"p", e.p}, {"fit", fit_json}});
    clauses.push_back(clause("lp_rate", e.p, e.finite ? json(e.exponent) : json(nullptr),
                             fit_json.is_null() ? json(nullptr) : fit_json["exponent"], verdict));
    const auto ex = as_rate_check(ens, e.q, a.thresholds, Ts);
    const bool holds = e.finite && e.p < 2.0;
    clauses.push_back(clause("as_exponential_rate", e.p, holds ? "holds" : "fails", ex.verdict,
                             pair_verdict(holds, !e.finite, ex.verdict)));
  }
  rates["lp"] = lp;
  write_text_file((out / "rates.json").string(), dump(with_meta(rates, sc)));
  write_text_file((out / "rates_curve.csv").string(), curve_csv.str());
  const int code = flagged_fraction > 0.1 ? kExitNumerical : kExitOk;
  json summary = {{"exit_code", code}, {"flagged_fraction", flagged_fraction},
                  {"paths", ens_raw.paths()}, {"clauses", clauses}, {"warnings", json::array()}};
  write_text_file((out / "summary.json").string(), dump(with_meta(summary, sc)));
  if (code == kExitNumerical) log << "numerical failure: too many flagged paths\n";
  return code;
}

}  // namespace

int run_scenario(const json& config, const RunOverrides& overrides, std::ostream& log) {
  Scenario sc;
  try {
    sc = parse_scenario(config, overrides);
  } catch (const SchemaError& e) {
    log << "schema error: " << e.what() << "\n";
    return kExitSchema;
  }
  try {
    fs::create_directories(sc.output);
    return sc.gw ? run_gw(sc, log) : run_csbp(sc, log);
  } catch (const ModelError& e) {
    log << "model error: " << e.what() << "\n";
    return kExitModel;
  } catch (const NumericalError& e) {
    log << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace supermart
