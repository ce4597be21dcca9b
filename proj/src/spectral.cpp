#include "supermart/spectral.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>
#include <sstream>

namespace supermart {

namespace {

int principal_index(const Eigen::VectorXcd& values) {
  int best = 0;
  for (int k = 1; k < values.size(); ++k)
    if (values[k].real() > values[best].real()) best = k;
  return best;
}

// Real Perron vector of m for eigenvalue lambda, refined by one inverse
// iteration step and made positive.
Eigen::VectorXd perron_vector(const Eigen::MatrixXd& m, double lambda) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m);
  const int k = principal_index(es.eigenvalues());
  Eigen::VectorXd v = es.eigenvectors().col(k).real();
  if (v.sum() < 0.0) v = -v;

  const int d = static_cast<int>(m.rows());
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double shift = lambda + 1e-9 * scale;
  Eigen::MatrixXd shifted = m - shift * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd w = shifted.colPivHouseholderQr().solve(v);
  if (w.allFinite() && w.norm() > 0.0) {
    if (w.sum() < 0.0) w = -w;
    v = w;
  }
  return v / v.cwiseAbs().maxCoeff();
}

}  // namespace

Eigen::MatrixXd mean_generator(const Model& model) {
  Eigen::MatrixXd a = model.motion.q;
  a.diagonal() += model.mech.beta;
  return a;
}

Eigen::MatrixXd semigroup_matrix(const Model& model, double t) {
  const int d = model.dim();
  if (t == 0.0) return Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd e = (t * mean_generator(model)).exp();
  return e.cwiseMax(0.0);
}

Eigen::VectorXd semigroup_apply(const Model& model, double t, const Eigen::VectorXd& f) {
  if (t < 0.0) throw ModelError("semigroup time must be non-negative");
  return semigroup_matrix(model, t) * f;
}

Eigentriple principal_eigentriple(const Model& model) {
  const int d = model.dim();
  if (model.motion.q.rows() != d || model.mech.beta.size() != d)
    throw ModelError("model dimensions disagree with number of types");
  if (!is_irreducible(model.motion.q)) throw ModelError("reducible motion: Q is not irreducible");

  const Eigen::MatrixXd a = mean_generator(model);
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  const auto values = es.eigenvalues();
  const std::complex<double> top = values[principal_index(values)];
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if (std::abs(top.imag()) > 1e-9 * scale)
    throw NumericalError("principal eigenvalue is not real");

  Eigentriple eig;
  eig.phi = perron_vector(a, top.real());
  eig.nu = perron_vector(a.transpose(), top.real());
  if ((eig.phi.array() <= 0.0).any() || (eig.nu.array() <= 0.0).any())
    throw NumericalError("Perron vectors are not strictly positive");

  eig.nu /= eig.nu.sum();
  eig.phi /= eig.nu.dot(eig.phi);
  // Rayleigh quotient with the matched left vector.
  eig.lambda = eig.nu.dot(a * eig.phi) / eig.nu.dot(eig.phi);

  if (!(eig.lambda > 0.0)) {
    std::ostringstream os;
    os << "subcritical/critical model: principal eigenvalue " << eig.lambda
       << " <= 0; increase beta to obtain a supercritical model";
    throw ModelError(os.str());
  }
  return eig;
}

double spectral_gap(const Model& model, const Eigentriple& eig) {
  if (model.dim() == 1) return std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Eigen::MatrixXd> es(mean_generator(model), false);
  const auto values = es.eigenvalues();
  const int top = principal_index(values);
  double second = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < values.size(); ++k)
    if (k != top) second = std::max(second, values[k].real());
  return eig.lambda - second;
}

double c_of_t(const Model& model, const Eigentriple& eig, double t) {
  const int d = model.dim();
  // exp(t (A - lambda I)) avoids overflow of e^{lambda t} for long times.
  Eigen::MatrixXd a = mean_generator(model);
  a.diagonal().array() -= eig.lambda;
  const Eigen::MatrixXd p = (t * a).exp();
  double c = 0.0;
  for (int x = 0; x < d; ++x)
    for (int j = 0; j < d; ++j)
      c = std::max(c, std::abs(p(x, j) / (eig.phi[x] * eig.nu[j]) - 1.0));
  return c;
}

CtCurve c_curve(const Model& model, const Eigentriple& eig, double horizon, int points) {
  CtCurve curve;
  curve.grid.reserve(points);
  curve.c.reserve(points);
  for (int k = 1; k <= points; ++k) {
    const double t = horizon * k / points;
    curve.grid.push_back(t);
    curve.c.push_back(c_of_t(model, eig, t));
  }
  return curve;
}

MixingReport mixing_report(const Model& model, const Eigentriple& eig, double target,
                                     double horizon, int points) {
  if (!(target > 0.0 && target < 1.0)) throw ModelError("target must lie in (0, 1)");
  if (!is_irreducible(model.motion.q)) throw ModelError("reducible motion: Q is not irreducible");
  const double gap = spectral_gap(model, eig);
  if (!(horizon > 0.0)) horizon = std::isinf(gap) ? 1.0 : 50.0 / gap;

  MixingReport report;
  report.curve = c_curve(model, eig, horizon, points);
  const auto& c = report.curve.c;
  constexpr double kFloor = 1e-12;  // below this c_t is roundoff

  // Scan backwards for the longest non-increasing suffix.
  int start = static_cast<int>(c.size()) - 1;
  while (start > 0 && (c[start - 1] >= c[start] || c[start - 1] < kFloor)) --start;
  for (int k = start; k < static_cast<int>(c.size()); ++k) {
    if (c[k] <= target) {
      report.t_star = report.curve.grid[k];
      return report;
    }
  }
  std::ostringstream os;
  os << "c_t did not fall below " << target << " within horizon " << horizon;
  throw NumericalError(os.str());
}

Model rescale_time(const Model& model, double scale) {
  Model out = model;
  out.motion.q *= scale;
  out.mech.beta *= scale;
  out.mech.alpha *= scale;
  for (auto& kernel : out.mech.kernels) {
    if (auto* s = std::get_if<StablePowerLaw>(&kernel)) {
      s->gamma *= scale;
    } else {
      for (auto& atom : std::get<AtomList>(kernel).atoms) atom.rate *= scale;
    }
  }
  return out;
}

}  // namespace supermart
