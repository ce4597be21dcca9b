#pragma once

#include <string>
#include <utility>
#include <vector>

#include "supermart/sim.hpp"

namespace supermart {

enum class FunctionalKind { M, A, Atilde, C, Ctilde, window_avg };

std::string kind_name(FunctionalKind kind);

struct FunctionalCurve {
  FunctionalKind kind = FunctionalKind::M;
  double parameter = 0.0;  // a*, p or gamma; window index for window_avg
  std::vector<double> grid;
  std::vector<double> values;
};

// Logged jumps (path.jumps) are placed at their exact times. Without a jump
// log every increment is treated as continuous.

FunctionalCurve m_curve(const PathRecord& path);

/// int_0^t e^{lambda s / a*} (Minf - M_s) ds.
FunctionalCurve a_functional(const PathRecord& path, const Eigentriple& eig, double Minf,
                             double a_star);

/// int_0^t e^{lambda s / q} dM_s, q the conjugate of p; left-point sums.
FunctionalCurve a_tilde_functional(const PathRecord& path, const Eigentriple& eig, double p);

/// (C, Ctilde) with C_t = int_0^t s^{g-1} (Minf - M_s) ds and
/// Ctilde_t = int_0^t s^g dM_s.
std::pair<FunctionalCurve, FunctionalCurve> c_functionals(const PathRecord& path,
                                                          const Eigentriple& eig, double Minf,
                                                          double g);

/// int_n^{n+1} e^{-lambda s} <phi 1_F, X_s> ds by the trapezoid rule.
double window_average(const PathRecord& path, const Eigentriple& eig, int n,
                      const std::vector<int>& F);

/// A_T(q) - (q/l) Atilde_T(p) - (q/l) e^{l T/q} (Minf - M_T) + (q/l) (Minf - M_0) at T = end.
double exponential_identity_residual(const PathRecord& path, const Eigentriple& eig, double Minf,
                                     double p);

/// g C_T - Ctilde_T - T^g (Minf - M_T) at T = end.
double polynomial_identity_residual(const PathRecord& path, const Eigentriple& eig, double Minf,
                                    double g);

/// Keeps every stride-th record and the last one. The jump log is kept.
PathRecord subsample(const PathRecord& path, int stride);

}  // namespace supermart
