#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "supermart/scenario.hpp"

using namespace supermart;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string model;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> paths;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<int> threads;
  std::string out;
};

int resolve_threads(const Common& c) {
  if (c.threads) return std::max(1, *c.threads);
  if (const char* env = std::getenv("SUPERMART_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw SchemaError("", "SUPERMART_THREADS is not an integer");
    }
  }
  return 1;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty())
    std::cout << text;
  else
    write_text_file(out, text);
}

std::vector<int> parse_F(const std::string& s, int d) {
  std::vector<int> F;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int i = 0;
    try {
      i = std::stoi(item);
    } catch (const std::exception&) {
      throw SchemaError("/F", "expected a comma-separated list of type indices");
    }
    if (i < 1 || i > d) throw SchemaError("/F", "unknown type index " + item);
    F.push_back(i - 1);
  }
  return F;
}

json unwrap(json j) { return j.is_object() && j.contains("data") ? j["data"] : j; }

// Accepts a bare model or the model.json artifact written by run.
json read_model_json(const Common& c) {
  if (c.model.empty()) throw SchemaError("", "--model is required");
  json j = unwrap(read_json_file(c.model));
  return j.is_object() && j.contains("model") ? j["model"] : j;
}

Model load_model(const Common& c) { return model_from_json(read_model_json(c)); }

void check_valid(const Model& m) {
  const auto v = validate_model(m);
  if (!v.ok) throw ModelError(v.failures.front().message);
}


std::vector<PathRecord> load_paths(const std::string& paths_csv, const std::string& jumps_csv) {
  std::ifstream is(paths_csv);
  if (!is) throw SchemaError("", "cannot open " + paths_csv);
  auto paths = read_paths_csv(is);
  if (!jumps_csv.empty()) {
    std::ifstream js(jumps_csv);
    if (!js) throw SchemaError("", "cannot open " + jumps_csv);
    read_jumps_csv(js, paths);
  }
  return paths;
}

void add_common(CLI::App* app, Common& c, bool sim_flags) {
  app->add_option("--model", c.model, "Model JSON file");
  app->add_option("--out", c.out, "Output file or directory");
  app->add_option("--threads", c.threads, "Worker threads (fallback: SUPERMART_THREADS)");
  if (sim_flags) {
    app->add_option("--seed", c.seed, "Master seed");
    app->add_option("--paths", c.paths, "Number of paths");
    app->add_option("--dt", c.dt, "Time step");
    app->add_option("--horizon", c.horizon, "Simulation horizon");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Martingale limits of finite-type superprocesses"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  Common c;

  auto* eigen = app.add_subcommand("eigen", "Principal eigentriple, spectral gap and c_t curve");
  add_common(eigen, c, false);

  std::vector<double> ps, gammas;
  std::string F_list = "1";
  double t0 = 10.0, t1 = 10.0;
  auto* criteria = app.add_subcommand("criteria", "Moment criteria and rate predictions");
  add_common(criteria, c, false);
  criteria->add_option("--p", ps, "Moment exponent p in (1, 2] (repeatable)");
  criteria->add_option("--gamma", gammas, "Polynomial exponent gamma > 0 (repeatable)");
  criteria->add_option("--F", F_list, "Comma-separated 1-based type list");
  criteria->add_option("--t0", t0, "Lower end of the uniform tail window");
  criteria->add_option("--t1", t1, "Lower end of the lower bound window");

  std::string sim_kind;
  double epsilon = 0.0, delta = 1e-3, delta_m = 1e-2;
  int generations = 20;
  auto* simulate = app.add_subcommand("simulate", "Simulate an ensemble and write CSV");
  add_common(simulate, c, true);
  simulate->add_option("kind", sim_kind, "gw, csbp or spine")
      ->required()
      ->check(CLI::IsMember({"gw", "csbp", "spine"}));
  simulate->add_option("--epsilon", epsilon, "Large jump threshold");
  simulate->add_option("--delta", delta, "Continuum immigration quantum");
  simulate->add_option("--delta-m", delta_m, "Discrete immigrant cutoff");
  simulate->add_option("--generations", generations, "Galton-Watson generations");

  std::string paths_csv, jumps_csv, criteria_json;
  auto* functionals = app.add_subcommand("functionals", "Per-path functional curves from a paths CSV");
  add_common(functionals, c, false);
  functionals->add_option("paths_csv", paths_csv, "Paths CSV")->required();
  functionals->add_option("--jumps", jumps_csv, "Jump log CSV");
  functionals->add_option("--p", ps, "Exponent p (repeatable)");
  functionals->add_option("--gamma", gammas, "Exponent gamma (repeatable)");
  functionals->add_option("--F", F_list, "Comma-separated 1-based type list");

  std::vector<double> thresholds{0.1, 0.3, 1.0, 3.0, 10.0};
  auto* rates = app.add_subcommand("rates", "Rate fits from a paths CSV and a criteria JSON");
  add_common(rates, c, false);
  rates->add_option("paths_csv", paths_csv, "Paths CSV")->required();
  rates->add_option("criteria_json", criteria_json, "Criteria JSON")->required();
  rates->add_option("--seed", c.seed, "Bootstrap seed");
  rates->add_option("--threshold", thresholds, "Exceedance thresholds (repeatable)");

  auto* run = app.add_subcommand("run", "Run a scenario config and write all artifacts");
  add_common(run, c, true);
  run->add_option("--config", c.config, "Scenario JSON")->required();

  std::string suite;
  auto* verify = app.add_subcommand("verify", "Run a built-in invariant suite");
  add_common(verify, c, false);
  verify->add_option("suite", suite, "eigen, transform, martingale, identities or spine")
      ->required()
      ->check(CLI::IsMember({"eigen", "transform", "martingale", "identities", "spine"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitSchema;
  }

  try {
    const int threads = resolve_threads(c);

    if (*eigen) {
      const Model m = load_model(c);
      check_valid(m);
      const auto eig = principal_eigentriple(m);
      emit(c.out, eigen_to_json(m, eig).dump(2) + "\n");
      return kExitOk;
    }

    if (*criteria) {
      const json mj = read_model_json(c);
      if (ps.empty()) ps = {1.2};
      if (gammas.empty()) gammas = {1.0};
      if (is_gw_json(mj)) {
        emit(c.out, gw_criteria_to_json(gw_criteria(gw_from_json(mj), ps, gammas)).dump(2) + "\n");
        return kExitOk;
      }
      const Model m = model_from_json(mj);
      check_valid(m);
      const auto eig = principal_eigentriple(m);
      const auto report = evaluate_criteria(m, eig, ps, gammas, parse_F(F_list, m.dim()), t0, t1);
      emit(c.out, criteria_to_json(report).dump(2) + "\n");
      return kExitOk;
    }

    if (*simulate) {
      if (!c.seed) throw SchemaError("/seed", "--seed is required");
      if (c.out.empty()) throw SchemaError("", "--out is required");
      fs::create_directories(c.out);
      const json mj = read_model_json(c);
      json canon = {{"model", mj}, {"kind", sim_kind}, {"argv", json::array()}};
      for (int k = 1; k < argc; ++k) {
        const std::string a = argv[k];
        if (a.rfind("--threads", 0) == 0 || a.rfind("--out", 0) == 0) {
          if (a.find('=') == std::string::npos) ++k;
          continue;
        }
        canon["argv"].push_back(a);
      }
      const std::string meta = meta_line(fnv1a64(canon.dump()), *c.seed);
      const auto paths_n = c.paths.value_or(1000);
      if (sim_kind == "gw") {
        const auto gw = simulate_gw(gw_from_json(mj), generations, paths_n, *c.seed, threads);
        std::ostringstream os;
        write_gw_csv(os, gw, meta);
        write_text_file((fs::path(c.out) / "paths.csv").string(), os.str());
        return kExitOk;
      }
      const Model m = model_from_json(mj);
      check_valid(m);
      const auto eig = principal_eigentriple(m);
      SpineConfig cfg;
      cfg.dt = c.dt.value_or(1e-2);
      cfg.horizon = c.horizon.value_or(4.0);
      cfg.epsilon = epsilon;
      cfg.paths = paths_n;
      cfg.master_seed = *c.seed;
      cfg.log_jumps = true;
      cfg.threads = threads;
      cfg.delta = delta;
      cfg.delta_m = delta_m;
      std::vector<PathRecord> paths;
      if (sim_kind == "spine") {
        const auto diag = spine_diagnostics(m, cfg);
        if (diag.budget_exceeded) std::cerr << "warning: " << diag.warning << "\n";
        paths = simulate_spine(m, eig, cfg);
      } else {
        paths = simulate_csbp(m, eig, cfg);
      }
      std::ostringstream os, js;
      write_paths_csv(os, paths, meta);
      write_jumps_csv(js, paths, meta);
      write_text_file((fs::path(c.out) / "paths.csv").string(), os.str());
      write_text_file((fs::path(c.out) / "jumps.csv").string(), js.str());
      std::int64_t flagged = 0;
      for (const auto& p : paths) flagged += p.flagged;
      if (flagged * 10 > static_cast<std::int64_t>(paths.size())) {
        std::cerr << "numerical failure: " << flagged << " flagged paths\n";
        return kExitNumerical;
      }
      return kExitOk;
    }

    if (*functionals) {
      const Model m = load_model(c);
      check_valid(m);
      const auto eig = principal_eigentriple(m);
      if (ps.empty()) ps = {1.2};
      if (gammas.empty()) gammas = {1.0};
      const auto F = parse_F(F_list, m.dim());
      const auto paths = load_paths(paths_csv, jumps_csv);
      std::ostringstream os;
      os << "path_id,kind,t,value\n";
      for (const auto& path : paths) {
        const double minf = estimate_Minfty(path);
        std::vector<FunctionalCurve> curves{m_curve(path)};
        for (double p : ps) {
          curves.push_back(a_functional(path, eig, minf, p / (p - 1.0)));
          curves.push_back(a_tilde_functional(path, eig, p));
        }
        for (double g : gammas) {
          auto [cc, ct] = c_functionals(path, eig, minf, g);
          curves.push_back(cc);
          curves.push_back(ct);
        }
        FunctionalCurve w{FunctionalKind::window_avg, 0.0, {}, {}};
        for (int n = 0; n + 1 <= path.times.back() + 1e-9; ++n) {
          w.grid.push_back(n);
          w.values.push_back(window_average(path, eig, n, F));
        }
        curves.push_back(w);
        write_functionals_csv(os, path.path_id, curves);
      }
      const bool to_dir = !c.out.empty() && std::filesystem::is_directory(c.out);
      emit(to_dir ? (std::filesystem::path(c.out) / "functionals.csv").string() : c.out, os.str());
      return kExitOk;
    }

    if (*rates) {
      if (c.out.empty()) throw SchemaError("", "--out is required");
      const json cj = unwrap(read_json_file(criteria_json));
      const auto paths = load_paths(paths_csv, "");
      const Ensemble ens = ensemble_from_paths(paths, cj.at("lambda").get<double>());
      std::vector<double> grid;
      for (double t : ens.times)
        if (t >= 0.1 * ens.horizon - 1e-9 && t <= 0.5 * ens.horizon + 1e-9 && t > 0.0) grid.push_back(t);
      if (grid.size() > 10) {
        std::vector<double> thin;
        for (int k = 0; k < 10; ++k)
          thin.push_back(grid[static_cast<std::size_t>(std::llround(k * (grid.size() - 1) / 9.0))]);
        grid = thin;
      }
      const std::vector<double> Ts{ens.horizon / 8.0, ens.horizon / 4.0, 3.0 * ens.horizon / 8.0};
      json fits = json::array(), checks = json::array();
      std::ostringstream csv;
      csv << "p,t,value,stderr\n";
      for (const auto& e : cj.at("p")) {
        const double p = e.at("p").get<double>();
        const bool finite = e.at("finite").get<bool>();
        const auto curve = lp_curve(ens, p, grid, c.seed.value_or(0));
        for (std::size_t k = 0; k < curve.t.size(); ++k)
          csv << format_double(p) << ',' << format_double(curve.t[k]) << ','
              << format_double(curve.value[k]) << ',' << format_double(curve.stderr_[k]) << '\n';
        const double pred = finite ? e.at("lp_limit_exponent").get<double>()
                                   : std::numeric_limits<double>::quiet_NaN();
        auto fj = fit_to_json(fit_exponential(curve, pred, static_cast<std::int64_t>(ens.size())));
        fj["p"] = p;
        fits.push_back(fj);
        const auto ex = as_rate_check(ens, e.at("q").get<double>(), thresholds, Ts);
        checks.push_back({{"p", p}, {"as_rate", exceedance_to_json(ex)}});
      }
      for (const auto& e : cj.at("gamma")) {
        const double g = e.at("gamma").get<double>();
        const auto pr = poly_rate_check(ens, g, thresholds, Ts);
        checks.push_back({{"gamma", g}, {"pointwise", exceedance_to_json(pr.pointwise)},
                          {"series", exceedance_to_json(pr.series)}});
      }
      fs::create_directories(c.out);
      write_text_file((fs::path(c.out) / "rates.json").string(),
                      json({{"fits", fits}, {"checks", checks}}).dump(2) + "\n");
      write_text_file((fs::path(c.out) / "rates_curve.csv").string(), csv.str());
      return kExitOk;
    }

    if (*run) {
      json config;
      try {
        config = read_json_file(c.config);
      } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitSchema;
      }
      RunOverrides ov;
      ov.seed = c.seed;
      if (!c.out.empty()) ov.out = c.out;
      ov.paths = c.paths;
      ov.dt = c.dt;
      ov.horizon = c.horizon;
      ov.threads = threads;
      ov.base_dir = fs::path(c.config).parent_path().string();
      if (ov.base_dir.empty()) ov.base_dir = ".";
      return run_scenario(config, ov, std::cerr);
    }

    if (*verify) {
      const auto r = verify_suite(suite, threads);
      emit(c.out, r.report.dump(2) + "\n");
      return r.pass ? kExitOk : kExitNumerical;
    }
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitModel;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const json::exception& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  }
  return kExitOk;
}
