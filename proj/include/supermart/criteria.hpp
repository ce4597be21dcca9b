#pragma once

#include <string>
#include <vector>

#include "supermart/model.hpp"
#include "supermart/spectral.hpp"

namespace supermart {

// All integrals are against nu(dy) pi^phi(y, dr), the phi-transformed kernel
// averaged over the left eigenvector. +inf marks divergence.

/// Integral of r ln r over r > 1.
double llogl(const Model& model, const Eigentriple& eig);
/// Integral of r^p over r > 1.
double p_moment(const Model& model, const Eigentriple& eig, double p);
/// Integral of r (ln r)^(g+1) over r > 1.
double log_moment(const Model& model, const Eigentriple& eig, double g);

// The same three quantities by numerical quadrature of the transformed kernel.
// Only meaningful when the integral converges.
double llogl_quadrature(const Model& model, const Eigentriple& eig);
double p_moment_quadrature(const Model& model, const Eigentriple& eig, double p);
double log_moment_quadrature(const Model& model, const Eigentriple& eig, double g);

/// Log grid on (lo, hi] with `per_decade` points per decade; hi is included.
std::vector<double> log_grid(double lo, double hi, int per_decade);

/// Grid supremum over t in (T0, 1e6] of
///   max_x phi_tail(x, t) / phi(x)  /  sum_y nu(y) phi_tail(y, t).
/// NaN when the ratio is undefined at every grid point.
double uniform_tail_B(const Model& model, const Eigentriple& eig, double T0);
/// t-independent value for all-stable kernels sharing one alpha; NaN otherwise.
double uniform_tail_B_closed_form(const Model& model, const Eigentriple& eig);

/// Grid infimum over t in (T1, 1e6] of
///   min_{x in F} (1/phi(x)) int_t^inf r pi^phi(x,dr)  /  sum_y nu(y) int_t^inf r pi^phi(y,dr).
/// F holds 0-based type indices.
double lower_bound_b(const Model& model, const Eigentriple& eig, const std::vector<int>& F,
                     double T1);
double lower_bound_b_closed_form(const Model& model, const Eigentriple& eig,
                                 const std::vector<int>& F);

struct InfLogResult {
  std::string verdict;  // "holds" or "fails"
  std::vector<double> t;
  std::vector<double> value;  // (ln t)^g * int_t^inf r (ln r - ln t) pi^phi, nu-averaged
};

/// An empty grid selects 10 points per decade on (10, 1e12].
InfLogResult inf_log_condition(const Model& model, const Eigentriple& eig, double g,
                               std::vector<double> t_grid = {});

struct PPrediction {
  double p = 0.0;
  double q = 0.0;
  double p_moment = 0.0;
  bool finite = false;
  double lp_limit_exponent = 0.0;  // -lambda/q: L^p rate for every a < p approaches this
  std::vector<std::pair<double, double>> lp_exponents;  // (a, -lambda/a*)
  double as_rate_exponent = 0.0;                         // -lambda/q
  bool as_rate_holds = false;
  bool as_rate_fails_expected = false;
};

struct GammaPrediction {
  double gamma = 0.0;
  double log_moment = 0.0;
  bool finite = false;
  InfLogResult inf_log;
  bool holds = false;  // series converges and M_inf - M_t = o(t^-gamma)
  bool series_fails_expected = false;
  bool poly_fails_expected = false;
};

struct CriteriaReport {
  double lambda = 0.0;
  double llogl = 0.0;
  bool nondegenerate = false;
  double T0 = 10.0;
  double B = 0.0;
  double T1 = 10.0;
  std::vector<int> F;
  double b = 0.0;
  std::vector<PPrediction> p;
  std::vector<GammaPrediction> gamma;
};

CriteriaReport evaluate_criteria(const Model& model, const Eigentriple& eig,
                                 const std::vector<double>& ps, const std::vector<double>& gammas,
                                 const std::vector<int>& F, double T0 = 10.0, double T1 = 10.0);

/// Fills the verdict fields of each entry from the moment values, B and b.
void rate_predictions(CriteriaReport& report);

struct GWCriteria {
  double m = 0.0;
  double zlogz = 0.0;  // E Z log Z
  struct PEntry {
    double p, q, moment;
    bool finite;
    double exponent;  // -(1/q) ln m per generation
  };
  std::vector<PEntry> p;
  struct GammaEntry {
    double gamma, moment;  // E Z (log Z)^(1+gamma)
    bool finite;
  };
  std::vector<GammaEntry> gamma;
};

GWCriteria gw_criteria(const GWModel& gw, const std::vector<double>& ps,
                       const std::vector<double>& gammas);

}  // namespace supermart
