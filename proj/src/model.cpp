#include "supermart/model.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "supermart/spectral.hpp"

namespace supermart {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double stable_moment(const StablePowerLaw& s, double k, double lo, double hi) {
  if (s.gamma == 0.0) return 0.0;
  const double e = k - s.alpha;
  if (lo <= 0.0 && e <= 0.0) return kInf;
  if (std::isinf(hi) && e >= 0.0) return kInf;
  if (std::abs(e) < 1e-14) return s.gamma * std::log(hi / lo);
  const double lo_term = lo <= 0.0 ? 0.0 : std::pow(lo, e);
  const double hi_term = std::isinf(hi) ? 0.0 : std::pow(hi, e);
  return s.gamma * (hi_term - lo_term) / e;
}

double integrate_log_scale(const std::function<double(double)>& g, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  constexpr double kTol = 1e-11;
  auto piece = [&](double lo, double hi) {
    double err = 0.0;
    return gauss_kronrod<double, 61>::integrate(g, lo, hi, 20, kTol, &err);
  };
  if (a < 0.0 && b > 0.0) return piece(a, 0.0) + piece(0.0, b);
  return piece(a, b);
}

std::size_t pick_weighted(const std::vector<double>& weights, double total, Rng& rng) {
  double u = uniform01(rng) * total;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  // Rounding can leave u marginally above the last weight.
  for (std::size_t k = weights.size(); k-- > 0;)
    if (weights[k] > 0.0) return k;
  return 0;
}

void check_type(const Model& model, int i) {
  if (i < 0 || i >= model.dim()) {
    std::ostringstream os;
    os << "type index " << i << " out of range for d=" << model.dim();
    throw ModelError(os.str());
  }
}

}  // namespace

GWModel GWModel::finite(std::vector<double> pmf) {
  GWModel g;
  g.kind = Kind::finite;
  g.pmf = std::move(pmf);
  return g;
}

GWModel GWModel::power_law(double alpha) {
  GWModel g;
  g.kind = Kind::power_law;
  g.alpha = alpha;
  g.c = 1.0 / boost::math::zeta(1.0 + alpha);
  return g;
}

double GWModel::mean() const {
  if (kind == Kind::power_law) return c * boost::math::zeta(alpha);
  double m = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) m += static_cast<double>(k) * pmf[k];
  return m;
}

double GWModel::prob(long long k) const {
  if (kind == Kind::power_law)
    return k >= 1 ? c * std::pow(static_cast<double>(k), -1.0 - alpha) : 0.0;
  return (k >= 0 && static_cast<std::size_t>(k) < pmf.size()) ? pmf[k] : 0.0;
}

double kernel_tail(const JumpKernel& kernel, double t) {
  return std::visit(overloaded{
                        [&](const StablePowerLaw& s) {
                          return s.gamma == 0.0 ? 0.0 : s.gamma * std::pow(t, -s.alpha) / s.alpha;
                        },
                        [&](const AtomList& a) {
                          double sum = 0.0;
                          for (const auto& atom : a.atoms)
                            if (atom.mass > t) sum += atom.rate;
                          return sum;
                        }},
                    kernel);
}

double kernel_partial_moment(const JumpKernel& kernel, double k, double lo, double hi) {
  return std::visit(overloaded{
                        [&](const StablePowerLaw& s) { return stable_moment(s, k, lo, hi); },
                        [&](const AtomList& a) {
                          double sum = 0.0;
                          for (const auto& atom : a.atoms)
                            if (atom.mass > lo && atom.mass <= hi)
                              sum += atom.rate * std::pow(atom.mass, k);
                          return sum;
                        }},
                    kernel);
}

double kernel_integral(const JumpKernel& kernel, const std::function<double(double)>& f,
                       double lo, double hi) {
  return std::visit(
      overloaded{[&](const StablePowerLaw& s) {
                   if (s.gamma == 0.0) return 0.0;
                   // r = e^u turns the power-law density into an exponential one.
                   auto g = [&](double u) {
                     const double v = f(std::exp(u)) * std::exp(-s.alpha * u);
                     return std::isfinite(v) ? v : 0.0;
                   };
                   const double a = lo > 0.0 ? std::log(lo) : -kInf;
                   const double b = std::isinf(hi) ? kInf : std::log(hi);
                   return s.gamma * integrate_log_scale(g, a, b);
                 },
                 [&](const AtomList& a) {
                   double sum = 0.0;
                   for (const auto& atom : a.atoms)
                     if (atom.mass > lo && atom.mass <= hi) sum += atom.rate * f(atom.mass);
                   return sum;
                 }},
      kernel);
}

double kernel_integral_log(const JumpKernel& kernel, const std::function<double(double)>& log_f,
                           double lo, double hi) {
  return std::visit(
      overloaded{[&](const StablePowerLaw& s) {
                   if (s.gamma == 0.0) return 0.0;
                   auto g = [&](double u) {
                     const double v = std::exp(log_f(u) - s.alpha * u);
                     return std::isfinite(v) ? v : 0.0;
                   };
                   const double a = lo > 0.0 ? std::log(lo) : -kInf;
                   const double b = std::isinf(hi) ? kInf : std::log(hi);
                   return s.gamma * integrate_log_scale(g, a, b);
                 },
                 [&](const AtomList& a) {
                   double sum = 0.0;
                   for (const auto& atom : a.atoms)
                     if (atom.mass > lo && atom.mass <= hi)
                       sum += atom.rate * std::exp(log_f(std::log(atom.mass)));
                   return sum;
                 }},
      kernel);
}

JumpKernel phi_transform(const JumpKernel& kernel, double phi) {
  return std::visit(overloaded{[&](const StablePowerLaw& s) -> JumpKernel {
                                 return StablePowerLaw{s.gamma * std::pow(phi, s.alpha), s.alpha};
                               },
                               [&](const AtomList& a) -> JumpKernel {
                                 AtomList out = a;
                                 for (auto& atom : out.atoms) atom.mass *= phi;
                                 return out;
                               }},
                    kernel);
}

double sample_tail(const JumpKernel& kernel, double eps, Rng& rng) {
  if (!(kernel_tail(kernel, eps) > 0.0)) throw ModelError("empty tail: no jump mass above threshold");
  return std::visit(overloaded{[&](const StablePowerLaw& s) {
                                 const double u = uniform01(rng);
                                 return eps * std::pow(1.0 - u, -1.0 / s.alpha);
                               },
                               [&](const AtomList& a) {
                                 std::vector<double> w;
                                 double total = 0.0;
                                 for (const auto& atom : a.atoms) {
                                   w.push_back(atom.mass > eps ? atom.rate : 0.0);
                                   total += w.back();
                                 }
                                 return a.atoms[pick_weighted(w, total, rng)].mass;
                               }},
                    kernel);
}

double sample_size_biased(const JumpKernel& kernel, double lo, double hi, Rng& rng) {
  return std::visit(overloaded{[&](const StablePowerLaw& s) {
                                 // density proportional to y^(-alpha) on (lo, hi]
                                 const double e = 1.0 - s.alpha;
                                 const double a = std::pow(lo, e);
                                 const double b = std::isinf(hi) ? 0.0 : std::pow(hi, e);
                                 const double u = uniform01(rng);
                                 return std::pow(a - u * (a - b), 1.0 / e);
                               },
                               [&](const AtomList& a) {
                                 std::vector<double> w;
                                 double total = 0.0;
                                 for (const auto& atom : a.atoms) {
                                   const bool in = atom.mass > lo && atom.mass <= hi;
                                   w.push_back(in ? atom.rate * atom.mass : 0.0);
                                   total += w.back();
                                 }
                                 if (!(total > 0.0)) throw ModelError("empty size-biased range");
                                 return a.atoms[pick_weighted(w, total, rng)].mass;
                               }},
                    kernel);
}

bool kernel_is_zero(const JumpKernel& kernel) {
  return std::visit(overloaded{[](const StablePowerLaw& s) { return s.gamma == 0.0; },
                               [](const AtomList& a) {
                                 for (const auto& atom : a.atoms)
                                   if (atom.rate > 0.0) return false;
                                 return true;
                               }},
                    kernel);
}

bool is_irreducible(const Eigen::MatrixXd& q) {
  const int d = static_cast<int>(q.rows());
  if (d <= 1) return true;
  auto reach_all = [&](bool transpose) {
    std::vector<bool> seen(d, false);
    std::queue<int> todo;
    todo.push(0);
    seen[0] = true;
    int count = 1;
    while (!todo.empty()) {
      const int i = todo.front();
      todo.pop();
      for (int j = 0; j < d; ++j) {
        const double rate = transpose ? q(j, i) : q(i, j);
        if (j != i && rate > 0.0 && !seen[j]) {
          seen[j] = true;
          ++count;
          todo.push(j);
        }
      }
    }
    return count == d;
  };
  return reach_all(false) && reach_all(true);
}

ValidationReport validate_model(const Model& model) {
  ValidationReport report;
  auto fail = [&](std::string code, std::string message) {
    report.ok = false;
    report.failures.push_back({std::move(code), std::move(message)});
  };
  const int d = model.dim();
  if (d < 1) {
    fail("dimension", "number of types must be at least 1");
    return report;
  }
  const auto& q = model.motion.q;
  if (q.rows() != d || q.cols() != d || model.mech.beta.size() != d ||
      model.mech.alpha.size() != d || static_cast<int>(model.mech.kernels.size()) != d) {
    fail("dimension", "model dimensions disagree with number of types");
    return report;
  }

  bool negative_rate = false;
  for (int i = 0; i < d; ++i) {
    double row = 0.0, scale = 1.0;
    for (int j = 0; j < d; ++j) {
      row += q(i, j);
      scale = std::max(scale, std::abs(q(i, j)));
      if (i != j && q(i, j) < 0.0) negative_rate = true;
    }
    if (std::abs(row) > 1e-12 * scale) {
      std::ostringstream os;
      os << "non-conservative motion: row " << i + 1 << " of Q sums to " << row;
      fail("non-conservative", os.str());
    }
  }
  if (negative_rate) fail("negative-rate", "off-diagonal entries of Q must be non-negative");
  if (!negative_rate && !is_irreducible(q)) fail("reducible", "motion is not irreducible");

  for (int i = 0; i < d; ++i) {
    if (!(model.mech.alpha[i] >= 0.0))
      fail("negative-alpha", "alpha[" + std::to_string(i + 1) + "] must be non-negative");
    if (!std::isfinite(model.mech.beta[i]))
      fail("beta", "beta[" + std::to_string(i + 1) + "] must be finite");
  }

  report.r_wedge_r2.assign(d, 0.0);
  for (int i = 0; i < d; ++i) {
    const auto& kernel = model.mech.kernels[i];
    bool valid = true;
    if (const auto* s = std::get_if<StablePowerLaw>(&kernel)) {
      if (!(s->alpha > 1.0 && s->alpha < 2.0) || !(s->gamma >= 0.0)) valid = false;
    } else {
      for (const auto& atom : std::get<AtomList>(kernel).atoms)
        if (!(atom.mass > 0.0) || !(atom.rate > 0.0) || !std::isfinite(atom.mass)) valid = false;
    }
    if (!valid) {
      fail("invalid-kernel", "jump kernel of type " + std::to_string(i + 1) + " is invalid");
      report.r_wedge_r2[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double v = kernel_partial_moment(kernel, 2.0, 0.0, 1.0) +
                     kernel_partial_moment(kernel, 1.0, 1.0, kInf);
    report.r_wedge_r2[i] = v;
    if (!std::isfinite(v))
      fail("unbounded-kernel",
           "integral of (r ^ r^2) pi(dr) diverges for type " + std::to_string(i + 1));
  }
  return report;
}

double kernel_tail(const Model& model, int i, double t) {
  check_type(model, i);
  return kernel_tail(model.mech.kernels[i], t);
}

double kernel_partial_moment(const Model& model, int i, double k, double lo, double hi) {
  check_type(model, i);
  return kernel_partial_moment(model.mech.kernels[i], k, lo, hi);
}

double phi_tail(const Model& model, const Eigentriple& eig, int i, double t) {
  check_type(model, i);
  return kernel_tail(model.mech.kernels[i], t / eig.phi[i]);
}

double sample_large_jump(const Model& model, int i, double eps, Rng& rng) {
  check_type(model, i);
  return sample_tail(model.mech.kernels[i], eps, rng);
}

}  // namespace supermart
