#include "supermart/criteria.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace supermart {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGridEnd = 1e6;

template <class PerType>
double nu_average(const Model& model, const Eigentriple& eig, PerType per_type) {
  double sum = 0.0;
  for (int i = 0; i < model.dim(); ++i) {
    const double v = per_type(phi_transform(model.mech.kernels[i], eig.phi[i]));
    if (std::isinf(v)) return kInf;
    sum += eig.nu[i] * v;
  }
  return sum;
}

// Integral of r (ln r)^k over r > 1 for a single kernel, exact.
double log_power_moment(const JumpKernel& kernel, double k) {
  if (const auto* s = std::get_if<StablePowerLaw>(&kernel)) {
    if (s->gamma == 0.0) return 0.0;
    return s->gamma * std::tgamma(k + 1.0) / std::pow(s->alpha - 1.0, k + 1.0);
  }
  double sum = 0.0;
  for (const auto& atom : std::get<AtomList>(kernel).atoms)
    if (atom.mass > 1.0) sum += atom.rate * atom.mass * std::pow(std::log(atom.mass), k);
  return sum;
}

// (1/phi) int_t^inf r pi^phi(dr) = int_{t/phi}^inf r pi(dr)
double first_moment_tail_over_phi(const JumpKernel& kernel, double phi, double t) {
  return kernel_partial_moment(kernel, 1.0, t / phi, kInf);
}

// int_t^inf r (ln r - ln t) pi^phi(dr) for the transformed kernel.
double log_excess(const JumpKernel& transformed, double t) {
  if (const auto* s = std::get_if<StablePowerLaw>(&transformed)) {
    if (s->gamma == 0.0) return 0.0;
    return s->gamma * std::pow(t, 1.0 - s->alpha) / ((s->alpha - 1.0) * (s->alpha - 1.0));
  }
  double sum = 0.0;
  for (const auto& atom : std::get<AtomList>(transformed).atoms)
    if (atom.mass > t) sum += atom.rate * atom.mass * (std::log(atom.mass) - std::log(t));
  return sum;
}

bool common_stable_alpha(const Model& model, double& alpha) {
  alpha = kNaN;
  for (const auto& kernel : model.mech.kernels) {
    const auto* s = std::get_if<StablePowerLaw>(&kernel);
    if (!s) return false;
    if (std::isnan(alpha)) alpha = s->alpha;
    if (s->alpha != alpha) return false;
  }
  return true;
}

double conjugate(double p) { return p / (p - 1.0); }

}  // namespace

double llogl(const Model& model, const Eigentriple& eig) {
  return nu_average(model, eig, [](const JumpKernel& k) { return log_power_moment(k, 1.0); });
}

double p_moment(const Model& model, const Eigentriple& eig, double p) {
  return nu_average(model, eig,
                    [&](const JumpKernel& k) { return kernel_partial_moment(k, p, 1.0, kInf); });
}

double log_moment(const Model& model, const Eigentriple& eig, double g) {
  return nu_average(model, eig, [&](const JumpKernel& k) { return log_power_moment(k, g + 1.0); });
}

double llogl_quadrature(const Model& model, const Eigentriple& eig) {
  return nu_average(model, eig, [](const JumpKernel& k) {
    return kernel_integral_log(k, [](double u) { return u + std::log(u); }, 1.0, kInf);
  });
}

double p_moment_quadrature(const Model& model, const Eigentriple& eig, double p) {
  return nu_average(model, eig, [&](const JumpKernel& k) {
    return kernel_integral_log(k, [&](double u) { return p * u; }, 1.0, kInf);
  });
}

double log_moment_quadrature(const Model& model, const Eigentriple& eig, double g) {
  return nu_average(model, eig, [&](const JumpKernel& k) {
    return kernel_integral_log(k, [&](double u) { return u + (g + 1.0) * std::log(u); }, 1.0,
                               kInf);
  });
}

std::vector<double> log_grid(double lo, double hi, int per_decade) {
  std::vector<double> grid;
  const double decades = std::log10(hi / lo);
  const int n = std::max(1, static_cast<int>(std::ceil(decades * per_decade - 1e-9)));
  for (int k = 1; k <= n; ++k) grid.push_back(k == n ? hi : lo * std::pow(10.0, double(k) / per_decade));
  return grid;
}

double uniform_tail_B(const Model& model, const Eigentriple& eig, double T0) {
  const int d = model.dim();
  double best = kNaN;
  for (double t : log_grid(T0, std::max(kGridEnd, T0 * 10.0), 60)) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < d; ++i) {
      const double tail = phi_tail(model, eig, i, t);
      num = std::max(num, tail / eig.phi[i]);
      den += eig.nu[i] * tail;
    }
    if (num == 0.0 && den == 0.0) continue;
    const double ratio = den > 0.0 ? num / den : kInf;
    best = std::isnan(best) ? ratio : std::max(best, ratio);
  }
  return best;
}

double uniform_tail_B_closed_form(const Model& model, const Eigentriple& eig) {
  double alpha = 0.0;
  if (!common_stable_alpha(model, alpha)) return kNaN;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < model.dim(); ++i) {
    const double g = std::get<StablePowerLaw>(model.mech.kernels[i]).gamma;
    num = std::max(num, g * std::pow(eig.phi[i], alpha - 1.0));
    den += eig.nu[i] * g * std::pow(eig.phi[i], alpha);
  }
  return den > 0.0 ? num / den : kNaN;
}

double lower_bound_b(const Model& model, const Eigentriple& eig, const std::vector<int>& F,
                     double T1) {
  const int d = model.dim();
  if (F.empty()) throw ModelError("set F must contain at least one type");
  for (int x : F)
    if (x < 0 || x >= d) throw ModelError("type in F out of range");
  double best = kNaN;
  for (double t : log_grid(T1, std::max(kGridEnd, T1 * 10.0), 60)) {
    double num = kInf, den = 0.0;
    for (int x : F)
      num = std::min(num, first_moment_tail_over_phi(model.mech.kernels[x], eig.phi[x], t));
    for (int y = 0; y < d; ++y)
      den += eig.nu[y] * eig.phi[y] * first_moment_tail_over_phi(model.mech.kernels[y], eig.phi[y], t);
    if (num == 0.0 && den == 0.0) continue;
    const double ratio = num == 0.0 ? 0.0 : num / den;
    best = std::isnan(best) ? ratio : std::min(best, ratio);
  }
  return best;
}

double lower_bound_b_closed_form(const Model& model, const Eigentriple& eig,
                                 const std::vector<int>& F) {
  double alpha = 0.0;
  if (!common_stable_alpha(model, alpha) || F.empty()) return kNaN;
  double num = kInf, den = 0.0;
  for (int x : F) {
    const double g = std::get<StablePowerLaw>(model.mech.kernels[x]).gamma;
    num = std::min(num, g * std::pow(eig.phi[x], alpha - 1.0));
  }
  for (int y = 0; y < model.dim(); ++y) {
    const double g = std::get<StablePowerLaw>(model.mech.kernels[y]).gamma;
    den += eig.nu[y] * g * std::pow(eig.phi[y], alpha);
  }
  if (num == 0.0) return 0.0;
  return den > 0.0 ? num / den : kNaN;
}

InfLogResult inf_log_condition(const Model& model, const Eigentriple& eig, double g,
                               std::vector<double> t_grid) {
  if (!(g > 0.0)) throw ModelError("gamma must be positive");
  if (t_grid.empty()) t_grid = log_grid(10.0, 1e12, 10);
  InfLogResult out;
  out.t = t_grid;
  double largest_atom = 0.0;
  for (int i = 0; i < model.dim(); ++i)
    if (const auto* a = std::get_if<AtomList>(&model.mech.kernels[i]))
      for (const auto& atom : a->atoms) largest_atom = std::max(largest_atom, atom.mass * eig.phi[i]);

  double peak = 0.0;
  for (double t : t_grid) {
    double v = 0.0;
    for (int i = 0; i < model.dim(); ++i)
      v += eig.nu[i] * log_excess(phi_transform(model.mech.kernels[i], eig.phi[i]), t);
    v *= std::pow(std::log(t), g);
    out.value.push_back(v);
    peak = std::max(peak, v);
  }

  const double t_end = t_grid.back();
  if (largest_atom < t_end) {
    // Atom parts vanish beyond the grid and stable parts decay like a power of t.
    out.verdict = "holds";
    return out;
  }
  const double end = out.value.back();
  bool tail_nonincreasing = true;
  for (std::size_t k = 0; k + 1 < t_grid.size(); ++k)
    if (t_grid[k] >= t_end / 10.0 && out.value[k + 1] > out.value[k]) tail_nonincreasing = false;
  out.verdict = (peak == 0.0 || (end <= 1e-2 * peak && tail_nonincreasing)) ? "holds" : "fails";
  return out;
}

void rate_predictions(CriteriaReport& report) {
  const double lambda = report.lambda;
  const bool B_finite = std::isfinite(report.B);
  const bool b_positive = !std::isnan(report.b) && report.b > 0.0;
  for (auto& e : report.p) {
    e.q = conjugate(e.p);
    e.finite = std::isfinite(e.p_moment);
    e.lp_exponents.clear();
    e.lp_limit_exponent = -lambda / e.q;
    if (e.finite) {
      for (int k = 1; k <= 3; ++k) {
        const double a = 1.0 + (e.p - 1.0) * k / 4.0;
        e.lp_exponents.emplace_back(a, -lambda / conjugate(a));
      }
    }
    e.as_rate_exponent = -lambda / e.q;
    e.as_rate_holds = e.finite && e.p < 2.0;
    e.as_rate_fails_expected = !e.finite && B_finite && e.p < 2.0;
  }
  for (auto& e : report.gamma) {
    e.finite = std::isfinite(e.log_moment);
    e.holds = e.finite;
    e.series_fails_expected = !e.finite && b_positive;
    e.poly_fails_expected = e.inf_log.verdict == "fails" && b_positive;
  }
}

CriteriaReport evaluate_criteria(const Model& model, const Eigentriple& eig,
                                 const std::vector<double>& ps, const std::vector<double>& gammas,
                                 const std::vector<int>& F, double T0, double T1) {
  CriteriaReport r;
  r.lambda = eig.lambda;
  r.llogl = llogl(model, eig);
  r.nondegenerate = std::isfinite(r.llogl);
  r.T0 = T0;
  r.T1 = T1;
  r.F = F;
  r.B = uniform_tail_B(model, eig, T0);
  r.b = F.empty() ? kNaN : lower_bound_b(model, eig, F, T1);
  for (double p : ps) {
    if (!(p > 1.0 && p <= 2.0)) throw ModelError("p must lie in (1, 2]");
    PPrediction e;
    e.p = p;
    e.p_moment = p_moment(model, eig, p);
    r.p.push_back(e);
  }
  for (double g : gammas) {
    GammaPrediction e;
    e.gamma = g;
    e.log_moment = log_moment(model, eig, g);
    e.inf_log = inf_log_condition(model, eig, g);
    r.gamma.push_back(e);
  }
  rate_predictions(r);
  return r;
}

namespace {

// E f(Z) for the power law c k^(-1-alpha): exact sum below n, integral above.
double power_law_expectation(const GWModel& gw, const std::function<double(double)>& f) {
  constexpr long long kExact = 100000;
  double sum = 0.0;
  for (long long k = kExact - 1; k >= 1; --k) sum += gw.prob(k) * f(static_cast<double>(k));
  auto g = [&](double u) {
    const double x = std::exp(u);
    const double v = gw.c * f(x) * std::exp(-gw.alpha * u);
    return std::isfinite(v) ? v : 0.0;
  };
  double err = 0.0;
  const double tail = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      g, std::log(kExact - 0.5), kInf, 20, 1e-12, &err);
  return sum + tail;
}

double finite_expectation(const GWModel& gw, const std::function<double(double)>& f) {
  double sum = 0.0;
  for (std::size_t k = 1; k < gw.pmf.size(); ++k) sum += gw.pmf[k] * f(static_cast<double>(k));
  return sum;
}

}  // namespace

GWCriteria gw_criteria(const GWModel& gw, const std::vector<double>& ps,
                       const std::vector<double>& gammas) {
  GWCriteria out;
  out.m = gw.mean();
  const bool power = gw.kind == GWModel::Kind::power_law;
  auto expect = [&](const std::function<double(double)>& f) {
    return power ? power_law_expectation(gw, f) : finite_expectation(gw, f);
  };
  out.zlogz = expect([](double k) { return k * std::log(k); });
  for (double p : ps) {
    GWCriteria::PEntry e{p, conjugate(p), 0.0, true, 0.0};
    if (power && p >= gw.alpha) {
      e.moment = kInf;
      e.finite = false;
    } else if (power) {
      e.moment = gw.c * boost::math::zeta(1.0 + gw.alpha - p);
    } else {
      e.moment = expect([&](double k) { return std::pow(k, p); });
    }
    e.exponent = -std::log(out.m) / e.q;
    out.p.push_back(e);
  }
  for (double g : gammas) {
    const double v = expect([&](double k) { return k * std::pow(std::log(k), 1.0 + g); });
    out.gamma.push_back({g, v, std::isfinite(v)});
  }
  return out;
}

}  // namespace supermart
