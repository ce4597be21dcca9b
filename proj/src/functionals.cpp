#include "supermart/functionals.hpp"

#include <algorithm>
#include <cmath>

namespace supermart {

namespace {

// Jump contributions to M on each recorded interval (t_k, t_{k+1}].
struct IntervalJumps {
  std::vector<std::vector<std::pair<double, double>>> by_interval;  // (time, dM)
};

IntervalJumps bucket_jumps(const PathRecord& path, const Eigentriple& eig) {
  IntervalJumps out;
  const std::size_t n = path.times.size();
  out.by_interval.resize(n > 0 ? n - 1 : 0);
  for (const auto& j : path.jumps) {
    auto it = std::lower_bound(path.times.begin(), path.times.end(), j.t);
    if (it == path.times.begin() || it == path.times.end()) continue;
    const std::size_t k = static_cast<std::size_t>(it - path.times.begin()) - 1;
    out.by_interval[k].emplace_back(j.t, std::exp(-eig.lambda * j.t) * eig.phi[j.type] * j.size);
  }
  return out;
}

double conjugate(double p) { return p / (p - 1.0); }

}  // namespace

std::string kind_name(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::M: return "M";
    case FunctionalKind::A: return "A";
    case FunctionalKind::Atilde: return "Atilde";
    case FunctionalKind::C: return "C";
    case FunctionalKind::Ctilde: return "Ctilde";
    case FunctionalKind::window_avg: return "window_avg";
  }
  return "unknown";
}

FunctionalCurve m_curve(const PathRecord& path) {
  return {FunctionalKind::M, 0.0, path.times, path.M};
}

FunctionalCurve a_functional(const PathRecord& path, const Eigentriple& eig, double Minf,
                             double a_star) {
  FunctionalCurve c{FunctionalKind::A, a_star, path.times, {}};
  const auto jumps = bucket_jumps(path, eig);
  const double rate = eig.lambda / a_star;
  auto g = [&](double s) { return std::exp(rate * s); };
  double acc = 0.0;
  c.values.push_back(0.0);
  for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
    const double t0 = path.times[k], t1 = path.times[k + 1];
    const double h = t1 - t0;
    acc += 0.5 * h * (g(t0) * (Minf - path.M[k]) + g(t1) * (Minf - path.M[k + 1]));
    // A jump at tau lowers Minf - M on [tau, t1] only, not along a ramp.
    for (const auto& [tau, dm] : jumps.by_interval[k])
      acc -= dm * ((g(t1) - g(tau)) / rate - 0.5 * h * g(t1));
    c.values.push_back(acc);
  }
  return c;
}

FunctionalCurve a_tilde_functional(const PathRecord& path, const Eigentriple& eig, double p) {
  const double q = conjugate(p);
  FunctionalCurve c{FunctionalKind::Atilde, p, path.times, {}};
  const auto jumps = bucket_jumps(path, eig);
  auto g = [&](double s) { return std::exp(eig.lambda * s / q); };
  double acc = 0.0;
  c.values.push_back(0.0);
  for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
    double continuous = path.M[k + 1] - path.M[k];
    for (const auto& [tau, dm] : jumps.by_interval[k]) {
      acc += g(tau) * dm;
      continuous -= dm;
    }
    acc += g(path.times[k]) * continuous;
    c.values.push_back(acc);
  }
  return c;
}

std::pair<FunctionalCurve, FunctionalCurve> c_functionals(const PathRecord& path,
                                                          const Eigentriple& eig, double Minf,
                                                          double g) {
  FunctionalCurve c{FunctionalKind::C, g, path.times, {}};
  FunctionalCurve ct{FunctionalKind::Ctilde, g, path.times, {}};
  const auto jumps = bucket_jumps(path, eig);
  auto pw = [&](double s) { return std::pow(s, g); };
  double acc = 0.0, acc_t = 0.0;
  c.values.push_back(0.0);
  ct.values.push_back(0.0);
  for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
    const double t0 = path.times[k], t1 = path.times[k + 1];
    // Exact weight int s^{g-1} ds times the endpoint average.
    const double w = (pw(t1) - pw(t0)) / g;
    acc += w * 0.5 * ((Minf - path.M[k]) + (Minf - path.M[k + 1]));
    double continuous = path.M[k + 1] - path.M[k];
    for (const auto& [tau, dm] : jumps.by_interval[k]) {
      acc -= dm * ((pw(t1) - pw(tau)) / g - 0.5 * w);
      acc_t += pw(tau) * dm;
      continuous -= dm;
    }
    acc_t += pw(t0) * continuous;
    c.values.push_back(acc);
    ct.values.push_back(acc_t);
  }
  return {c, ct};
}

double window_average(const PathRecord& path, const Eigentriple& eig, int n,
                      const std::vector<int>& F) {
  const double a = n, b = n + 1.0;
  if (path.times.empty() || b > path.times.back() + 1e-9)
    throw ModelError("window extends beyond the path horizon");
  auto value = [&](std::size_t k) {
    double v = 0.0;
    for (int x : F) v += eig.phi[x] * path.mass(k, x);
    return std::exp(-eig.lambda * path.times[k]) * v;
  };
  auto interp = [&](double t) {
    auto it = std::lower_bound(path.times.begin(), path.times.end(), t);
    std::size_t k = static_cast<std::size_t>(it - path.times.begin());
    if (k < path.times.size() && path.times[k] == t) return value(k);
    if (k == 0) return value(0);
    if (k >= path.times.size()) return value(path.times.size() - 1);
    const double w = (t - path.times[k - 1]) / (path.times[k] - path.times[k - 1]);
    return (1.0 - w) * value(k - 1) + w * value(k);
  };
  double prev_t = a, prev_v = interp(a), sum = 0.0;
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    const double t = path.times[k];
    if (t <= a + 1e-12 || t >= b - 1e-12) continue;
    const double v = value(k);
    sum += 0.5 * (t - prev_t) * (prev_v + v);
    prev_t = t;
    prev_v = v;
  }
  sum += 0.5 * (b - prev_t) * (prev_v + interp(b));
  return sum;
}

double exponential_identity_residual(const PathRecord& path, const Eigentriple& eig, double Minf,
                                     double p) {
  const double q = conjugate(p);
  const double l = eig.lambda;
  const double T = path.times.back();
  const double A = a_functional(path, eig, Minf, q).values.back();
  const double At = a_tilde_functional(path, eig, p).values.back();
  return A - (q / l) * At - (q / l) * std::exp(l * T / q) * (Minf - path.M.back()) +
         (q / l) * (Minf - path.M.front());
}

double polynomial_identity_residual(const PathRecord& path, const Eigentriple& eig, double Minf,
                                    double g) {
  const double T = path.times.back();
  const auto [c, ct] = c_functionals(path, eig, Minf, g);
  return g * c.values.back() - ct.values.back() - std::pow(T, g) * (Minf - path.M.back());
}

PathRecord subsample(const PathRecord& path, int stride) {
  PathRecord out;
  out.path_id = path.path_id;
  out.d = path.d;
  out.jumps = path.jumps;
  out.clipped = path.clipped;
  out.flagged = path.flagged;
  out.spine_occupation = path.spine_occupation;
  const std::size_t n = path.times.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (k % static_cast<std::size_t>(stride) != 0 && k + 1 != n) continue;
    out.times.push_back(path.times[k]);
    out.M.push_back(path.M[k]);
    for (int i = 0; i < path.d; ++i) out.masses.push_back(path.mass(k, i));
  }
  return out;
}

}  // namespace supermart
