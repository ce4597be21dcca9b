#include "supermart/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace supermart {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const json& require(const json& obj, const std::string& key, const std::string& ptr) {
  if (!obj.is_object()) throw SchemaError(ptr, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(ptr + "/" + key, "missing required key \"" + key + "\"");
  return *it;
}

double number(const json& j, const std::string& ptr) {
  if (j.is_string() && j.get<std::string>() == "inf") return kInf;
  if (!j.is_number()) throw SchemaError(ptr, "expected a number");
  return j.get<double>();
}

std::vector<double> number_array(const json& j, std::size_t n, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array");
  if (j.size() != n) {
    std::ostringstream os;
    os << "expected " << n << " entries, found " << j.size();
    throw SchemaError(ptr, os.str());
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(number(j[k], ptr + "/" + std::to_string(k)));
  return out;
}

JumpKernel kernel_from_json(const json& j, const std::string& ptr) {
  const auto& kind_node = require(j, "kind", ptr);
  if (!kind_node.is_string()) throw SchemaError(ptr + "/kind", "expected a string");
  const auto kind = kind_node.get<std::string>();
  if (kind == "stable") {
    return StablePowerLaw{number(require(j, "gamma", ptr), ptr + "/gamma"),
                          number(require(j, "alpha", ptr), ptr + "/alpha")};
  }
  if (kind == "atoms") {
    const auto& atoms = require(j, "atoms", ptr);
    if (!atoms.is_array()) throw SchemaError(ptr + "/atoms", "expected an array");
    AtomList list;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const std::string p = ptr + "/atoms/" + std::to_string(k);
      const auto pair = number_array(atoms[k], 2, p);
      list.atoms.push_back({pair[0], pair[1]});
    }
    return list;
  }
  throw SchemaError(ptr + "/kind", "unknown kernel kind \"" + kind + "\"");
}

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  return out;
}

}  // namespace

bool is_gw_json(const json& j) {
  if (!j.is_object()) return false;
  auto it = j.find("kind");
  return it != j.end() && it->is_string() &&
         (it->get<std::string>() == "gw" || it->get<std::string>() == "gw_powerlaw");
}

Model model_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("", "model must be a JSON object");
  const auto& types = require(j, "types", "");
  if (!types.is_number_integer() || types.get<long long>() < 1)
    throw SchemaError("/types", "expected a positive integer");
  const int d = types.get<int>();
  Model m;
  m.space.d = d;

  const auto& q = require(j, "Q", "");
  if (!q.is_array() || static_cast<int>(q.size()) != d)
    throw SchemaError("/Q", "expected " + std::to_string(d) + " rows");
  m.motion.q.resize(d, d);
  for (int i = 0; i < d; ++i) {
    const auto row = number_array(q[i], d, "/Q/" + std::to_string(i));
    for (int k = 0; k < d; ++k) m.motion.q(i, k) = row[k];
  }
  const auto beta = number_array(require(j, "beta", ""), d, "/beta");
  const auto alpha = number_array(require(j, "alpha", ""), d, "/alpha");
  m.mech.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), d);
  m.mech.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), d);

  const auto& kernels = require(j, "kernels", "");
  if (!kernels.is_array() || static_cast<int>(kernels.size()) != d)
    throw SchemaError("/kernels", "expected " + std::to_string(d) + " kernels");
  for (int i = 0; i < d; ++i) m.mech.kernels.push_back(kernel_from_json(kernels[i], "/kernels/" + std::to_string(i)));
  return m;
}

GWModel gw_from_json(const json& j) {
  const auto& kind = require(j, "kind", "");
  if (!kind.is_string()) throw SchemaError("/kind", "expected a string");
  if (kind.get<std::string>() == "gw") {
    const auto& pmf = require(j, "pmf", "");
    if (!pmf.is_array() || pmf.empty()) throw SchemaError("/pmf", "expected a non-empty array");
    return GWModel::finite(number_array(pmf, pmf.size(), "/pmf"));
  }
  if (kind.get<std::string>() == "gw_powerlaw")
    return GWModel::power_law(number(require(j, "alpha", ""), "/alpha"));
  throw SchemaError("/kind", "unknown model kind \"" + kind.get<std::string>() + "\"");
}

json model_to_json(const Model& model) {
  json j;
  const int d = model.dim();
  j["types"] = d;
  json q = json::array();
  for (int i = 0; i < d; ++i) q.push_back(vec(model.motion.q.row(i).transpose()));
  j["Q"] = q;
  j["beta"] = vec(model.mech.beta);
  j["alpha"] = vec(model.mech.alpha);
  json ks = json::array();
  for (const auto& k : model.mech.kernels) {
    if (const auto* s = std::get_if<StablePowerLaw>(&k)) {
      ks.push_back({{"kind", "stable"}, {"gamma", s->gamma}, {"alpha", s->alpha}});
    } else {
      json atoms = json::array();
      for (const auto& a : std::get<AtomList>(k).atoms) atoms.push_back({a.mass, a.rate});
      ks.push_back({{"kind", "atoms"}, {"atoms", atoms}});
    }
  }
  j["kernels"] = ks;
  return j;
}

json gw_to_json(const GWModel& gw) {
  if (gw.kind == GWModel::Kind::power_law) return {{"kind", "gw_powerlaw"}, {"alpha", gw.alpha}};
  return {{"kind", "gw"}, {"pmf", gw.pmf}};
}

json extended(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double extended_from_json(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInf;
    if (j.get<std::string>() == "-inf") return -kInf;
    throw SchemaError("", "expected a number or \"inf\"");
  }
  return j.get<double>();
}

json eigen_to_json(const Model& model, const Eigentriple& eig) {
  json j;
  j["lambda"] = eig.lambda;
  j["phi"] = vec(eig.phi);
  j["nu"] = vec(eig.nu);
  const double gap = spectral_gap(model, eig);
  j["gap"] = extended(gap);
  json curve = json::array();
  if (std::isfinite(gap)) {
    const auto c = c_curve(model, eig, 10.0 / gap, 100);
    for (std::size_t k = 0; k < c.grid.size(); ++k) curve.push_back({c.grid[k], c.c[k]});
    try {
      j["t_star"] = mixing_report(model, eig, 0.5).t_star;
    } catch (const NumericalError&) {
      j["t_star"] = nullptr;
    }
  } else {
    j["t_star"] = 0.0;
  }
  j["c_curve"] = curve;
  return j;
}

json validation_to_json(const ValidationReport& report) {
  json failures = json::array();
  for (const auto& f : report.failures) failures.push_back({{"code", f.code}, {"message", f.message}});
  json r = json::array();
  for (double v : report.r_wedge_r2) r.push_back(extended(v));
  return {{"ok", report.ok}, {"r_wedge_r2", r}, {"failures", failures}};
}

json criteria_to_json(const CriteriaReport& report) {
  json j;
  j["lambda"] = report.lambda;
  j["llogl"] = extended(report.llogl);
  j["nondegenerate"] = report.nondegenerate;
  j["T0"] = report.T0;
  j["B"] = extended(report.B);
  j["T1"] = report.T1;
  json F = json::array();
  for (int x : report.F) F.push_back(x + 1);
  j["F"] = F;
  j["b"] = extended(report.b);
  json ps = json::array();
  for (const auto& e : report.p) {
    json lp = json::array();
    for (const auto& [a, ex] : e.lp_exponents) lp.push_back({{"a", a}, {"exponent", ex}});
    ps.push_back({{"p", e.p},
                  {"q", e.q},
                  {"p_moment", extended(e.p_moment)},
                  {"finite", e.finite},
                  {"lp_limit_exponent", e.lp_limit_exponent},
                  {"lp_exponents", lp},
                  {"as_rate_exponent", e.as_rate_exponent},
                  {"as_rate_holds", e.as_rate_holds},
                  {"as_rate_fails_expected", e.as_rate_fails_expected}});
  }
  j["p"] = ps;
  json gs = json::array();
  for (const auto& e : report.gamma) {
    json curve = json::array();
    for (std::size_t k = 0; k < e.inf_log.t.size(); ++k)
      curve.push_back({e.inf_log.t[k], extended(e.inf_log.value[k])});
    gs.push_back({{"gamma", e.gamma},
                  {"log_moment", extended(e.log_moment)},
                  {"finite", e.finite},
                  {"inf_log", {{"verdict", e.inf_log.verdict}, {"curve", curve}}},
                  {"holds", e.holds},
                  {"series_fails_expected", e.series_fails_expected},
                  {"poly_fails_expected", e.poly_fails_expected}});
  }
  j["gamma"] = gs;
  return j;
}

json gw_criteria_to_json(const GWCriteria& c) {
  json j;
  j["m"] = c.m;
  j["zlogz"] = extended(c.zlogz);
  json ps = json::array();
  for (const auto& e : c.p)
    ps.push_back({{"p", e.p}, {"q", e.q}, {"moment", extended(e.moment)}, {"finite", e.finite},
                  {"exponent", e.exponent}});
  j["p"] = ps;
  json gs = json::array();
  for (const auto& e : c.gamma)
    gs.push_back({{"gamma", e.gamma}, {"moment", extended(e.moment)}, {"finite", e.finite}});
  j["gamma"] = gs;
  return j;
}

json fit_to_json(const RateFit& fit) {
  return {{"kind", fit.kind},
          {"exponent", extended(fit.exponent)},
          {"stderr", extended(fit.stderr_)},
          {"r2", extended(fit.r2)},
          {"window", {fit.t_lo, fit.t_hi}},
          {"n_paths", fit.n_paths},
          {"predicted", extended(fit.predicted)},
          {"verdict", fit.verdict}};
}

json exceedance_to_json(const ExceedanceReport& r) {
  return {{"T", r.T}, {"thresholds", r.thresholds}, {"fraction", r.fraction}, {"verdict", r.verdict}};
}

json window_law_to_json(const WindowLawReport& r) {
  json mad = json::array();
  for (double v : r.mad) mad.push_back(extended(v));
  return {{"target", r.target}, {"survival", r.survival}, {"n", r.n}, {"mad", mad},
          {"verdict", r.verdict}};
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string meta_line(std::uint64_t config_hash, std::uint64_t seed) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "# supermart %s config_hash=%016llx seed=%llu", kVersion,
                static_cast<unsigned long long>(config_hash), static_cast<unsigned long long>(seed));
  return buf;
}

void write_paths_csv(std::ostream& os, const std::vector<PathRecord>& paths,
                     const std::string& meta) {
  if (!meta.empty()) os << meta << '\n';
  const int d = paths.empty() ? 1 : paths.front().d;
  os << "path_id,t";
  for (int i = 1; i <= d; ++i) os << ",mass_" << i;
  os << ",M\n";
  for (const auto& p : paths) {
    for (std::size_t k = 0; k < p.times.size(); ++k) {
      os << p.path_id << ',' << format_double(p.times[k]);
      for (int i = 0; i < p.d; ++i) os << ',' << format_double(p.mass(k, i));
      os << ',' << format_double(p.M[k]) << '\n';
    }
  }
}

void write_jumps_csv(std::ostream& os, const std::vector<PathRecord>& paths,
                     const std::string& meta) {
  if (!meta.empty()) os << meta << '\n';
  os << "path_id,t,type,size\n";
  for (const auto& p : paths)
    for (const auto& j : p.jumps)
      os << p.path_id << ',' << format_double(j.t) << ',' << j.type + 1 << ','
         << format_double(j.size) << '\n';
}

void write_gw_csv(std::ostream& os, const GWEnsemble& gw, const std::string& meta) {
  if (!meta.empty()) os << meta << '\n';
  os << "path_id,n,W,flagged\n";
  for (std::size_t p = 0; p < gw.paths(); ++p)
    for (int n = 0; n <= gw.generations; ++n)
      os << p << ',' << n << ',' << format_double(gw.w(p, n)) << ',' << int(gw.flagged[p]) << '\n';
}

void write_functionals_csv(std::ostream& os, std::int64_t path_id,
                           const std::vector<FunctionalCurve>& curves) {
  for (const auto& c : curves) {
    std::string label = kind_name(c.kind);
    if (c.kind != FunctionalKind::M) label += "(" + format_double(c.parameter) + ")";
    for (std::size_t k = 0; k < c.grid.size(); ++k)
      os << path_id << ',' << label << ',' << format_double(c.grid[k]) << ','
         << format_double(c.values[k]) << '\n';
  }
}

namespace {

// strtod keeps subnormal values that std::stod rejects.
double parse_cell(const std::string& cell, std::size_t lineno) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0')
    throw SchemaError("", "CSV line " + std::to_string(lineno) + ": bad number \"" + cell + "\"");
  return v;
}

}  // namespace

std::vector<PathRecord> read_paths_csv(std::istream& is) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split(line, ',');
    break;
  }
  if (header.size() < 4 || header[0] != "path_id" || header[1] != "t" || header.back() != "M")
    throw SchemaError("", "paths CSV header must be path_id,t,mass_1..mass_d,M");
  const int d = static_cast<int>(header.size()) - 3;
  std::vector<PathRecord> paths;
  std::map<std::int64_t, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    if (static_cast<int>(cells.size()) != d + 3)
      throw SchemaError("", "paths CSV line " + std::to_string(lineno) + " has wrong width");
    const std::int64_t id = std::stoll(cells[0]);
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, paths.size()).first;
      PathRecord rec;
      rec.path_id = id;
      rec.d = d;
      paths.push_back(std::move(rec));
    }
    auto& rec = paths[it->second];
    rec.times.push_back(parse_cell(cells[1], lineno));
    for (int i = 0; i < d; ++i) rec.masses.push_back(parse_cell(cells[2 + i], lineno));
    rec.M.push_back(parse_cell(cells[2 + d], lineno));
  }
  return paths;
}

void read_jumps_csv(std::istream& is, std::vector<PathRecord>& paths) {
  std::map<std::int64_t, PathRecord*> index;
  for (auto& p : paths) index[p.path_id] = &p;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "path_id,t,type,size") throw SchemaError("", "jump CSV header must be path_id,t,type,size");
      header = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 4) throw SchemaError("", "jump CSV line has wrong width");
    auto it = index.find(std::stoll(cells[0]));
    if (it == index.end()) continue;
    it->second->jumps.push_back({parse_cell(cells[1], lineno), std::stoi(cells[2]) - 1, parse_cell(cells[3], lineno)});
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON in ") + path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
}

}  // namespace supermart
