#include <unsupported/Eigen/MatrixFunctions>

#include "support.hpp"

using namespace supermart;
using namespace supermart::test;
using Catch::Approx;

namespace {

// exp(tA) by diagonalization, independent of the Pade route.
Eigen::MatrixXd expm_by_eigen(const Eigen::MatrixXd& a, double t) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::MatrixXcd v = es.eigenvectors();
  const Eigen::VectorXcd e = (t * es.eigenvalues().array()).exp().matrix();
  return (v * e.asDiagonal() * v.inverse()).real();
}

}  // namespace

TEST_CASE("semigroup agrees with diagonalization") {
  Rng rng = make_stream(3, 0, Stream::bootstrap);
  for (int trial = 0; trial < 10; ++trial) {
    const Model m = random_irreducible(rng, 2 + trial % 4);
    const Eigen::MatrixXd a = mean_generator(m);
    for (double t : {0.1, 1.0, 3.0}) {
      const Eigen::MatrixXd oracle = expm_by_eigen(a, t);
      const Eigen::MatrixXd p = semigroup_matrix(m, t);
      CHECK((p - oracle).cwiseAbs().maxCoeff() / oracle.cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("two-type eigentriple closed form") {
  const double b1 = 2.0, b2 = 0.5;
  const Model m = two_type(b1, b2, StablePowerLaw{0, 1.5}, StablePowerLaw{0, 1.5});
  const auto eig = principal_eigentriple(m);
  const double half = 0.5 * (b1 - b2);
  const double lambda = 0.5 * (b1 + b2) - 1.0 + std::sqrt(half * half + 1.0);
  CHECK(eig.lambda == Approx(lambda).epsilon(1e-13));
  // A is symmetric, so phi and nu are proportional to the same vector.
  const double ratio = lambda - (b1 - 1.0);  // phi_2 / phi_1
  CHECK(eig.nu.sum() == Approx(1.0).epsilon(1e-14));
  CHECK(eig.nu.dot(eig.phi) == Approx(1.0).epsilon(1e-14));
  CHECK(eig.phi[1] / eig.phi[0] == Approx(ratio).epsilon(1e-12));
  CHECK(eig.nu[1] / eig.nu[0] == Approx(ratio).epsilon(1e-12));
  CHECK(spectral_gap(m, eig) == Approx(2.0 * std::sqrt(half * half + 1.0)).epsilon(1e-12));
}

TEST_CASE("symmetric chain has c_t = e^{-2t}") {
  const Model m = two_type(1.0, 1.0, StablePowerLaw{0, 1.5}, StablePowerLaw{0, 1.5});
  const auto eig = principal_eigentriple(m);
  CHECK(eig.lambda == Approx(1.0).epsilon(1e-14));
  CHECK(spectral_gap(m, eig) == Approx(2.0).epsilon(1e-12));
  for (double t : {0.1, 0.5, 2.0, 5.0}) CHECK(c_of_t(m, eig, t) == Approx(std::exp(-2.0 * t)).epsilon(1e-9));
  const auto rep = mixing_report(m, eig, 0.5, 5.0, 5000);
  CHECK(rep.t_star == Approx(std::log(2.0) / 2.0).margin(1e-3));
}

TEST_CASE("random models: residuals and semigroup law") {
  Rng rng = make_stream(4, 0, Stream::bootstrap);
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = random_irreducible(rng, 2 + trial % 5);
    const auto eig = principal_eigentriple(m);
    const Eigen::MatrixXd a = mean_generator(m);
    CHECK((a * eig.phi - eig.lambda * eig.phi).cwiseAbs().maxCoeff() < 1e-10 * eig.phi.maxCoeff());
    CHECK((a.transpose() * eig.nu - eig.lambda * eig.nu).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((eig.phi.array() > 0).all());
    CHECK((eig.nu.array() > 0).all());
    // P_t phi = e^{lambda t} phi
    const Eigen::VectorXd pt = semigroup_apply(m, 0.8, eig.phi);
    CHECK((pt - std::exp(0.8 * eig.lambda) * eig.phi).cwiseAbs().maxCoeff() < 1e-10 * pt.maxCoeff());
    const Eigen::MatrixXd s = semigroup_matrix(m, 0.4) * semigroup_matrix(m, 0.6);
    CHECK((s - semigroup_matrix(m, 1.0)).cwiseAbs().maxCoeff() < 1e-9 * s.maxCoeff());
    const double gap = spectral_gap(m, eig);
    CHECK(gap > 0.0);
    CHECK(c_of_t(m, eig, 10.0 / gap) < 1e-3);
  }
}

TEST_CASE("single type") {
  const Model m = single_type(0.7, 0.0, StablePowerLaw{0, 1.5});
  const auto eig = principal_eigentriple(m);
  CHECK(eig.lambda == Approx(0.7));
  CHECK(eig.phi[0] == Approx(1.0));
  CHECK(std::isinf(spectral_gap(m, eig)));
  CHECK(c_of_t(m, eig, 3.0) < 1e-12);
}

TEST_CASE("eigentriple errors") {
  Model reducible = two_type(1, 1, StablePowerLaw{0, 1.5}, StablePowerLaw{0, 1.5});
  reducible.motion.q << -1, 1, 0, 0;
  CHECK_THROWS_AS(principal_eigentriple(reducible), ModelError);
  const Model sub = two_type(-1, -0.5, StablePowerLaw{0, 1.5}, StablePowerLaw{0, 1.5});
  CHECK_THROWS_WITH(principal_eigentriple(sub), Catch::Matchers::ContainsSubstring("subcritical"));
}

TEST_CASE("time rescaling multiplies the eigenvalue") {
  const Model m = two_type(2.0, 0.5, StablePowerLaw{1, 1.5}, StablePowerLaw{1, 1.5});
  const auto eig = principal_eigentriple(m);
  const auto eig3 = principal_eigentriple(rescale_time(m, 3.0));
  CHECK(eig3.lambda == Approx(3.0 * eig.lambda).epsilon(1e-12));
  CHECK((eig3.phi - eig.phi).cwiseAbs().maxCoeff() < 1e-12);
}
