#pragma once

#include <Eigen/Dense>

#include <vector>

#include "supermart/model.hpp"

namespace supermart {

/// Perron triple of Q + diag(beta): A phi = lambda phi, nu^T A = lambda nu^T,
/// normalized so that sum(nu) = 1 and sum(nu * phi) = 1.
struct Eigentriple {
  double lambda = 0.0;
  Eigen::VectorXd phi;
  Eigen::VectorXd nu;
};

struct CtCurve {
  std::vector<double> grid;
  std::vector<double> c;
};

struct MixingReport {
  double t_star = 0.0;
  CtCurve curve;
};

Eigen::MatrixXd mean_generator(const Model& model);

/// exp(t (Q + diag beta)), entries clamped at 0 (the generator is Metzler).
Eigen::MatrixXd semigroup_matrix(const Model& model, double t);
Eigen::VectorXd semigroup_apply(const Model& model, double t, const Eigen::VectorXd& f);

Eigentriple principal_eigentriple(const Model& model);

/// lambda minus the largest real part among the remaining eigenvalues;
/// +inf when d = 1.
double spectral_gap(const Model& model, const Eigentriple& eig);

double c_of_t(const Model& model, const Eigentriple& eig, double t);

/// c_t on `points` equally spaced times in (0, horizon].
CtCurve c_curve(const Model& model, const Eigentriple& eig, double horizon, int points);

/// First grid time with c_t <= target after which the curve never increases.
/// A non-positive horizon selects 50/gap.
MixingReport mixing_report(const Model& model, const Eigentriple& eig, double target,
                                     double horizon = 0.0, int points = 5000);

/// The same process observed on the clock t' = t / scale: all rates multiply by scale.
Model rescale_time(const Model& model, double scale);

}  // namespace supermart
