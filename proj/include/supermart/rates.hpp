#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "supermart/sim.hpp"

namespace supermart {

/// Martingale paths on a common grid together with the limit proxies.
struct Ensemble {
  std::vector<double> times;
  std::vector<std::vector<double>> M;  // per path, on `times`
  std::vector<double> Minf;
  double rate = 0.0;     // lambda, or ln m for Galton-Watson generations
  double horizon = 0.0;  // time of the limit proxy
  std::int64_t excluded = 0;  // flagged paths left out

  std::size_t size() const { return M.size(); }
};

Ensemble ensemble_from_paths(const std::vector<PathRecord>& paths, double lambda);
Ensemble ensemble_from_gw(const GWEnsemble& gw);

/// Compensated (Neumaier) sum.
double stable_sum(const std::vector<double>& values);

struct Curve {
  std::vector<double> t;
  std::vector<double> value;
  std::vector<double> stderr_;
};

/// (E |Minf - M_t|^p)^(1/p) per grid time with a bootstrap standard error.
Curve lp_curve(const Ensemble& ens, double p, const std::vector<double>& grid,
               std::uint64_t seed = 0, int resamples = 200);

struct RateFit {
  std::string kind;  // "exponential" or "polynomial"
  double exponent = 0.0;
  double stderr_ = 0.0;
  double r2 = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::int64_t n_paths = 0;
  double predicted = 0.0;
  std::string verdict;  // consistent, inconsistent, inconclusive
};

/// Least squares slope of ln(value) against t.
RateFit fit_exponential(const Curve& curve, double predicted, std::int64_t n_paths = 0);
/// Least squares slope of ln(value) against ln(t).
RateFit fit_polynomial(const Curve& curve, double predicted, std::int64_t n_paths = 0);

struct ExceedanceReport {
  std::vector<double> T;
  std::vector<double> thresholds;
  std::vector<std::vector<double>> fraction;  // [T][threshold]: share with sup <= threshold
  std::string verdict;  // holds, fails-consistent, inconclusive
};

/// sup over t in [T, horizon/2] of e^{rate t / q} |Minf - M_t|, compared with thresholds.
ExceedanceReport as_rate_check(const Ensemble& ens, double q, const std::vector<double>& thresholds,
                               const std::vector<double>& T_values);

struct PolyRateReport {
  ExceedanceReport pointwise;  // t^g |Minf - M_t|
  ExceedanceReport series;     // sup_{t >= T} |int_T^t s^{g-1} (Minf - M_s) ds|
};

PolyRateReport poly_rate_check(const Ensemble& ens, double g, const std::vector<double>& thresholds,
                               const std::vector<double>& T_values);

struct WindowLawReport {
  double target = 0.0;  // <phi 1_F, nu>
  double survival = 0.0;
  std::vector<int> n;
  std::vector<double> mad;  // median |ratio - target| over surviving paths
  std::string verdict;
};

WindowLawReport window_law_check(const std::vector<PathRecord>& paths, const Eigentriple& eig,
                                 const std::vector<int>& F, const std::vector<int>& n_values);

}  // namespace supermart
