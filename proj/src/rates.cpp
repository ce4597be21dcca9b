#include "supermart/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "supermart/functionals.hpp"

namespace supermart {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t grid_index(const std::vector<double>& times, double t) {
  auto it = std::lower_bound(times.begin(), times.end(), t - 1e-9 * std::max(1.0, std::abs(t)));
  if (it == times.end() || std::abs(*it - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    std::ostringstream os;
    os << "time " << t << " is not on the recorded grid";
    throw ModelError(os.str());
  }
  return static_cast<std::size_t>(it - times.begin());
}

RateFit fit_line(const std::vector<double>& x, const std::vector<double>& y, double predicted,
                 std::int64_t n_paths) {
  RateFit fit;
  fit.predicted = predicted;
  fit.n_paths = n_paths;
  const std::size_t n = x.size();
  if (n < 3) {
    fit.verdict = "inconclusive";
    fit.exponent = kNaN;
    return fit;
  }
  const double mx = stable_sum(x) / n, my = stable_sum(y) / n;
  std::vector<double> sxx(n), sxy(n), syy(n);
  for (std::size_t k = 0; k < n; ++k) {
    sxx[k] = (x[k] - mx) * (x[k] - mx);
    sxy[k] = (x[k] - mx) * (y[k] - my);
    syy[k] = (y[k] - my) * (y[k] - my);
  }
  const double Sxx = stable_sum(sxx), Sxy = stable_sum(sxy), Syy = stable_sum(syy);
  fit.exponent = Sxy / Sxx;
  const double ssr = std::max(0.0, Syy - fit.exponent * Sxy);
  fit.stderr_ = std::sqrt(ssr / static_cast<double>(n - 2) / Sxx);
  fit.r2 = Syy > 0.0 ? 1.0 - ssr / Syy : 1.0;
  if (fit.r2 < 0.8) {
    fit.verdict = "inconclusive";
  } else {
    const double tol = std::max(2.0 * fit.stderr_, 0.15 * std::abs(predicted));
    fit.verdict = std::abs(fit.exponent - predicted) <= tol ? "consistent" : "inconsistent";
  }
  return fit;
}

RateFit fit_curve(const Curve& curve, double predicted, std::int64_t n_paths, bool log_x,
                  const char* kind) {
  bool all_zero = true, any_nonpositive = false;
  for (double v : curve.value) {
    if (v != 0.0) all_zero = false;
    if (!(v > 0.0)) any_nonpositive = true;
  }
  RateFit fit;
  if (all_zero) {
    fit.kind = kind;
    fit.exponent = -std::numeric_limits<double>::infinity();
    fit.predicted = predicted;
    fit.n_paths = n_paths;
    fit.verdict = "consistent";
  } else if (any_nonpositive) {
    throw NumericalError("curve values must be positive for a log-linear fit");
  } else {
    std::vector<double> x, y;
    for (std::size_t k = 0; k < curve.t.size(); ++k) {
      x.push_back(log_x ? std::log(curve.t[k]) : curve.t[k]);
      y.push_back(std::log(curve.value[k]));
    }
    fit = fit_line(x, y, predicted, n_paths);
    fit.kind = kind;
  }
  if (!curve.t.empty()) {
    fit.t_lo = curve.t.front();
    fit.t_hi = curve.t.back();
  }
  return fit;
}

std::string exceedance_verdict(const ExceedanceReport& r) {
  if (r.T.empty() || r.thresholds.empty()) return "inconclusive";
  const std::size_t last = r.thresholds.size() - 1;
  if (r.fraction.front()[last] >= 0.95) return "holds";
  bool persistent = true;
  for (const auto& row : r.fraction)
    if (1.0 - row[last] < 0.05) persistent = false;
  return persistent ? "fails-consistent" : "inconclusive";
}

template <class Score>
ExceedanceReport exceedance(const Ensemble& ens, const std::vector<double>& thresholds,
                            const std::vector<double>& T_values, Score score) {
  ExceedanceReport r;
  r.T = T_values;
  r.thresholds = thresholds;
  const double window_end = 0.5 * ens.horizon;
  const std::size_t n = ens.size();
  for (double T : T_values) {
    if (T > window_end + 1e-9) throw ModelError("T exceeds half the horizon");
    std::vector<double> sup(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) sup[p] = score(p, T, window_end);
    std::vector<double> row;
    for (double thr : thresholds) {
      std::size_t ok = 0;
      for (double s : sup)
        if (s <= thr) ++ok;
      row.push_back(n ? static_cast<double>(ok) / n : 1.0);
    }
    r.fraction.push_back(row);
  }
  r.verdict = exceedance_verdict(r);
  return r;
}

}  // namespace

double stable_sum(const std::vector<double>& values) {
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

Ensemble ensemble_from_paths(const std::vector<PathRecord>& paths, double lambda) {
  Ensemble ens;
  ens.rate = lambda;
  for (const auto& p : paths) {
    if (p.flagged) {
      ++ens.excluded;
      continue;
    }
    if (ens.times.empty()) ens.times = p.times;
    if (p.times.size() != ens.times.size()) throw ModelError("paths do not share one time grid");
    ens.M.push_back(p.M);
    ens.Minf.push_back(estimate_Minfty(p));
  }
  ens.horizon = ens.times.empty() ? 0.0 : ens.times.back();
  return ens;
}

Ensemble ensemble_from_gw(const GWEnsemble& gw) {
  Ensemble ens;
  ens.rate = std::log(gw.m);
  for (int n = 0; n <= gw.generations; ++n) ens.times.push_back(n);
  ens.horizon = gw.generations;
  for (std::size_t p = 0; p < gw.paths(); ++p) {
    if (gw.flagged[p]) {
      ++ens.excluded;
      continue;
    }
    std::vector<double> m(gw.generations + 1);
    for (int n = 0; n <= gw.generations; ++n) m[n] = gw.w(p, n);
    ens.Minf.push_back(m.back());
    ens.M.push_back(std::move(m));
  }
  return ens;
}

namespace {
constexpr double kRoundoff = 1e-12;
}

Curve lp_curve(const Ensemble& ens, double p, const std::vector<double>& grid, std::uint64_t seed,
               int resamples) {
  if (!(p >= 1.0)) throw ModelError("p must be at least 1");
  const std::size_t n = ens.size();
  if (n == 0) throw ModelError("empty ensemble");
  std::vector<std::size_t> idx;
  for (double t : grid) {
    if (t > 0.5 * ens.horizon + 1e-9) throw ModelError("grid exceeds half the horizon");
    idx.push_back(grid_index(ens.times, t));
  }
  const std::size_t g = grid.size();
  std::vector<double> powers(n * g);  // |Minf - M_t|^p, path-major
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < g; ++k) {
      const double a = ens.Minf[i], b = ens.M[i][idx[k]];
      // Differences at rounding level are zero.
      const double diff = std::abs(a - b) <= kRoundoff * std::max(std::abs(a), std::abs(b)) ? 0.0 : std::abs(a - b);
      powers[i * g + k] = std::pow(diff, p);
    }

  Curve c;
  c.t = grid;
  std::vector<double> column(n);
  for (std::size_t k = 0; k < g; ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = powers[i * g + k];
    c.value.push_back(std::pow(stable_sum(column) / n, 1.0 / p));
  }

  std::vector<std::vector<double>> boot(g, std::vector<double>(resamples));
  Rng rng = make_stream(seed, 0, Stream::bootstrap);
  std::vector<double> acc(g), comp(g);
  for (int b = 0; b < resamples; ++b) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(comp.begin(), comp.end(), 0.0);
    for (std::size_t draw = 0; draw < n; ++draw) {
      const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
      const double* row = &powers[std::min(i, n - 1) * g];
      for (std::size_t k = 0; k < g; ++k) {
        const double t = acc[k] + row[k];
        comp[k] += std::abs(acc[k]) >= std::abs(row[k]) ? (acc[k] - t) + row[k]
                                                       : (row[k] - t) + acc[k];
        acc[k] = t;
      }
    }
    for (std::size_t k = 0; k < g; ++k) boot[k][b] = std::pow((acc[k] + comp[k]) / n, 1.0 / p);
  }
  for (std::size_t k = 0; k < g; ++k) {
    const double mean = stable_sum(boot[k]) / resamples;
    std::vector<double> sq(resamples);
    for (int b = 0; b < resamples; ++b) sq[b] = (boot[k][b] - mean) * (boot[k][b] - mean);
    c.stderr_.push_back(std::sqrt(stable_sum(sq) / std::max(1, resamples - 1)));
  }
  return c;
}

RateFit fit_exponential(const Curve& curve, double predicted, std::int64_t n_paths) {
  return fit_curve(curve, predicted, n_paths, false, "exponential");
}

RateFit fit_polynomial(const Curve& curve, double predicted, std::int64_t n_paths) {
  return fit_curve(curve, predicted, n_paths, true, "polynomial");
}

ExceedanceReport as_rate_check(const Ensemble& ens, double q, const std::vector<double>& thresholds,
                               const std::vector<double>& T_values) {
  if (!(q > 1.0)) throw ModelError("q must exceed 1");
  return exceedance(ens, thresholds, T_values, [&](std::size_t p, double T, double end) {
    double sup = 0.0;
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
      const double t = ens.times[k];
      if (t < T - 1e-12 || t > end + 1e-12) continue;
      sup = std::max(sup, std::exp(ens.rate * t / q) * std::abs(ens.Minf[p] - ens.M[p][k]));
    }
    return sup;
  });
}

PolyRateReport poly_rate_check(const Ensemble& ens, double g, const std::vector<double>& thresholds,
                               const std::vector<double>& T_values) {
  if (!(g > 0.0)) throw ModelError("gamma must be positive");
  PolyRateReport r;
  r.pointwise = exceedance(ens, thresholds, T_values, [&](std::size_t p, double T, double end) {
    double sup = 0.0;
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
      const double t = ens.times[k];
      if (t < T - 1e-12 || t > end + 1e-12) continue;
      sup = std::max(sup, std::pow(t, g) * std::abs(ens.Minf[p] - ens.M[p][k]));
    }
    return sup;
  });
  r.series = exceedance(ens, thresholds, T_values, [&](std::size_t p, double T, double end) {
    double acc = 0.0, sup = 0.0;
    for (std::size_t k = 0; k + 1 < ens.times.size(); ++k) {
      const double t0 = ens.times[k], t1 = ens.times[k + 1];
      if (t0 < T - 1e-12 || t1 > end + 1e-12) continue;
      const double w = (std::pow(t1, g) - std::pow(t0, g)) / g;
      acc += w * 0.5 * ((ens.Minf[p] - ens.M[p][k]) + (ens.Minf[p] - ens.M[p][k + 1]));
      sup = std::max(sup, std::abs(acc));
    }
    return sup;
  });
  return r;
}

WindowLawReport window_law_check(const std::vector<PathRecord>& paths, const Eigentriple& eig,
                                 const std::vector<int>& F, const std::vector<int>& n_values) {
  WindowLawReport r;
  for (int x : F) r.target += eig.phi[x] * eig.nu[x];
  r.n = n_values;
  std::vector<const PathRecord*> alive;
  std::size_t usable = 0;
  for (const auto& p : paths) {
    if (p.flagged) continue;
    ++usable;
    if (estimate_Minfty(p) > 0.0) alive.push_back(&p);
  }
  r.survival = usable ? static_cast<double>(alive.size()) / usable : 0.0;
  for (int n : n_values) {
    std::vector<double> dev;
    for (const auto* p : alive)
      dev.push_back(std::abs(window_average(*p, eig, n, F) / estimate_Minfty(*p) - r.target));
    if (dev.empty()) {
      r.mad.push_back(kNaN);
      continue;
    }
    const std::size_t mid = dev.size() / 2;
    std::nth_element(dev.begin(), dev.begin() + mid, dev.end());
    double med = dev[mid];
    if (dev.size() % 2 == 0) {
      const double lower = *std::max_element(dev.begin(), dev.begin() + mid);
      med = 0.5 * (med + lower);
    }
    r.mad.push_back(med);
  }
  bool decreasing = !r.mad.empty();
  for (std::size_t k = 1; k < r.mad.size(); ++k)
    if (!(r.mad[k] <= r.mad[k - 1])) decreasing = false;
  r.verdict = decreasing && r.mad.back() < 0.05 ? "consistent" : "inconsistent";
  return r;
}

}  // namespace supermart
