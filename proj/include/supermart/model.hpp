#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "supermart/error.hpp"
#include "supermart/rng.hpp"

namespace supermart {

struct TypeSpace {
  int d = 1;
};

/// Generator of the spatial motion: off-diagonal jump rates, rows sum to 0.
struct RateMatrix {
  Eigen::MatrixXd q;
};

/// pi(dr) = gamma * r^(-1-alpha) dr on (0, inf), 1 < alpha < 2.
struct StablePowerLaw {
  double gamma = 0.0;
  double alpha = 1.5;
};

struct Atom {
  double mass = 0.0;  // jump size r
  double rate = 0.0;  // weight w
};

/// pi = sum_k w_k delta_{r_k}.
struct AtomList {
  std::vector<Atom> atoms;
};

using JumpKernel = std::variant<StablePowerLaw, AtomList>;

struct BranchingMechanism {
  Eigen::VectorXd beta;
  Eigen::VectorXd alpha;  // continuous branching coefficient
  std::vector<JumpKernel> kernels;
};

struct Model {
  TypeSpace space;
  RateMatrix motion;
  BranchingMechanism mech;

  int dim() const { return space.d; }
};

/// Galton-Watson offspring law. Either a finite pmf (p_0..p_K) or the power
/// law P(Z=k) = c k^(-1-alpha), k >= 1, with c = 1/zeta(1+alpha).
struct GWModel {
  enum class Kind { finite, power_law };
  Kind kind = Kind::finite;
  std::vector<double> pmf;
  double alpha = 1.5;
  double c = 0.0;

  static GWModel finite(std::vector<double> pmf);
  static GWModel power_law(double alpha);

  double mean() const;
  double prob(long long k) const;
};

struct ValidationFailure {
  std::string code;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<double> r_wedge_r2;  // per-type integral of (r ^ r^2) pi(dr)
  std::vector<ValidationFailure> failures;
};

struct Eigentriple;

// Single-kernel primitives. Atom intervals are half-open (lo, hi].

double kernel_tail(const JumpKernel& kernel, double t);
/// Integral of r^k over (lo, hi]; hi may be +inf. Returns +inf when divergent.
double kernel_partial_moment(const JumpKernel& kernel, double k, double lo, double hi);
/// Integral of f(r) pi(dr) over (lo, hi]. Exact for atoms; adaptive
/// Gauss-Kronrod in log scale for the stable density.
double kernel_integral(const JumpKernel& kernel, const std::function<double(double)>& f,
                       double lo, double hi);
/// The image kernel pi^phi: sizes scaled by phi.
/// Same integral with the integrand given as log f(e^u); avoids overflow for
/// slowly decaying tails.
double kernel_integral_log(const JumpKernel& kernel, const std::function<double(double)>& log_f,
                           double lo, double hi);
JumpKernel phi_transform(const JumpKernel& kernel, double phi);
/// Sample from pi restricted to (eps, inf), normalized.
double sample_tail(const JumpKernel& kernel, double eps, Rng& rng);
/// Sample from y pi(dy) restricted to (lo, hi], normalized.
double sample_size_biased(const JumpKernel& kernel, double lo, double hi, Rng& rng);
bool kernel_is_zero(const JumpKernel& kernel);

// Model-level operations.

ValidationReport validate_model(const Model& model);
double kernel_tail(const Model& model, int i, double t);
double kernel_partial_moment(const Model& model, int i, double k, double lo, double hi);
double phi_tail(const Model& model, const Eigentriple& eig, int i, double t);
double sample_large_jump(const Model& model, int i, double eps, Rng& rng);

bool is_irreducible(const Eigen::MatrixXd& q);

}  // namespace supermart
