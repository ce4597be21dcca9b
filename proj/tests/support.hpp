#pragma once

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "supermart/scenario.hpp"

namespace supermart::test {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline Model single_type(double beta, double alpha, JumpKernel kernel) {
  Model m;
  m.space.d = 1;
  m.motion.q = Eigen::MatrixXd::Zero(1, 1);
  m.mech.beta = Eigen::VectorXd::Constant(1, beta);
  m.mech.alpha = Eigen::VectorXd::Constant(1, alpha);
  m.mech.kernels = {std::move(kernel)};
  return m;
}

inline Model two_type(double b1, double b2, JumpKernel k1, JumpKernel k2, double a1 = 0.0,
                      double a2 = 0.0, double rate = 1.0) {
  Model m;
  m.space.d = 2;
  m.motion.q = (Eigen::MatrixXd(2, 2) << -rate, rate, rate, -rate).finished();
  m.mech.beta = Eigen::Vector2d(b1, b2);
  m.mech.alpha = Eigen::Vector2d(a1, a2);
  m.mech.kernels = {std::move(k1), std::move(k2)};
  return m;
}

inline Model random_irreducible(Rng& rng, int d) {
  Model m;
  m.space.d = d;
  m.motion.q = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j)
      if (i != j) m.motion.q(i, j) = 0.05 + 2.0 * uniform01(rng);
    m.motion.q(i, i) = -m.motion.q.row(i).sum();
  }
  m.mech.beta.resize(d);
  m.mech.alpha.resize(d);
  for (int i = 0; i < d; ++i) {
    m.mech.beta[i] = 0.1 + 2.0 * uniform01(rng);
    m.mech.alpha[i] = uniform01(rng);
    m.mech.kernels.push_back(StablePowerLaw{uniform01(rng), 1.1 + 0.8 * uniform01(rng)});
  }
  return m;
}

/// Integral of f over (a, b) in r-space, b may be +inf.
template <class F>
double quad(F f, double a, double b) {
  if (std::isinf(b)) {
    boost::math::quadrature::exp_sinh<double> es;
    return es.integrate([&](double u) { return f(a + u); }, 0.0, kInf, 1e-13);
  }
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, a, b, 1e-13);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace supermart::test
