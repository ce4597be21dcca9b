#include "support.hpp"

using namespace supermart;
using namespace supermart::test;
using Catch::Approx;

namespace {

struct Moments {
  double mean, var, se;
};

Moments moments(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += x;
  const double mean = s / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var = ss / (n - 1.0);
  return {mean, var, std::sqrt(var / n)};
}

std::vector<double> final_mass(const std::vector<PathRecord>& paths) {
  std::vector<double> out;
  for (const auto& p : paths) out.push_back(p.masses[p.masses.size() - p.d]);
  return out;
}

SimConfig feller_config(std::int64_t paths, double factor) {
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.horizon = 1.0;
  cfg.paths = paths;
  cfg.master_seed = 17;
  cfg.exact_mass_factor = factor;
  return cfg;
}

}  // namespace

TEST_CASE("Feller diffusion matches moment ODE in both step regimes") {
  // dX = X dt + sqrt(2 X) dW: E X_1 = e, Var X_1 = 2 (e^2 - e), P(X_1 = 0) = exp(-1/(1 - e^-1)).
  const Model m = single_type(1.0, 2.0, StablePowerLaw{0.0, 1.5});
  const auto eig = principal_eigentriple(m);
  const double e = std::exp(1.0);
  for (double factor : {64.0, 1e12}) {
    auto cfg = feller_config(40000, factor);
    cfg.x0 = Eigen::VectorXd::Ones(1);
    const auto paths = simulate_csbp(m, eig, cfg);
    const auto mo = moments(final_mass(paths));
    CHECK(std::abs(mo.mean - e) < 4.0 * mo.se);
    CHECK(mo.var == Approx(2.0 * (e * e - e)).epsilon(0.05));
    if (factor > 1e6) {
      int dead = 0;
      for (const auto& p : paths) dead += p.M.back() == 0.0;
      const double q = std::exp(-1.0 / (1.0 - std::exp(-1.0)));
      CHECK(std::abs(double(dead) / paths.size() - q) < 4.0 * std::sqrt(q * (1 - q) / paths.size()));
    }
  }
}

TEST_CASE("jump-driven mean grows at rate lambda") {
  const Model m = two_type(1.0, 0.5, StablePowerLaw{1.0, 1.5}, AtomList{{{0.3, 2.0}, {2.0, 0.2}}}, 0.2, 0.0);
  const auto eig = principal_eigentriple(m);
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.horizon = 2.0;
  cfg.paths = 20000;
  cfg.master_seed = 8;
  const auto paths = simulate_csbp(m, eig, cfg);
  std::vector<double> M;
  for (const auto& p : paths) M.push_back(p.M.back());
  const auto mo = moments(M);
  CHECK(std::abs(mo.mean - 1.0) < 4.0 * mo.se);
  // Per-type mean against the semigroup.
  const Eigen::VectorXd mean = semigroup_matrix(m, 2.0).transpose() * eig.nu;
  for (int i = 0; i < 2; ++i) {
    std::vector<double> xi;
    for (const auto& p : paths) xi.push_back(p.mass(p.times.size() - 1, i));
    const auto mi = moments(xi);
    CHECK(std::abs(mi.mean - mean[i]) < 4.0 * mi.se);
  }
}

TEST_CASE("stable branching matches its Laplace transform") {
  // psi(z) = -z + Gamma(-1.5) z^1.5 for gamma = 1; w = u^{-1/2} solves a linear ODE, so
  // E exp(-theta X_t) = exp(-u_t) with u_t^{-1/2} = k + (theta^{-1/2} - k) e^{-t/2}, k = 4 sqrt(pi) / 3.
  const Model m = single_type(1.0, 0.0, StablePowerLaw{1.0, 1.5});
  const auto eig = principal_eigentriple(m);
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 1.0;
  cfg.paths = 20000;
  cfg.record_stride = 1000;
  cfg.master_seed = 23;
  cfg.x0 = Eigen::VectorXd::Ones(1);
  const auto x = final_mass(simulate_csbp(m, eig, cfg));
  const double k = 4.0 * std::sqrt(std::acos(-1.0)) / 3.0;
  for (double theta : {0.05, 0.2, 1.0, 5.0}) {
    const double w = k + (1.0 / std::sqrt(theta) - k) * std::exp(-0.5);
    std::vector<double> v;
    for (double xi : x) v.push_back(std::exp(-theta * xi));
    const auto mo = moments(v);
    INFO("theta " << theta);
    CHECK(std::abs(mo.mean - std::exp(-1.0 / (w * w))) < 4.0 * mo.se);
  }
}

TEST_CASE("results do not depend on the thread count") {
  const Model m = two_type(1.0, 0.5, StablePowerLaw{1.0, 1.5}, StablePowerLaw{0.5, 1.5}, 0.5, 0.5);
  const auto eig = principal_eigentriple(m);
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.horizon = 1.0;
  cfg.paths = 64;
  cfg.master_seed = 3;
  cfg.log_jumps = true;
  const auto a = simulate_csbp(m, eig, cfg);
  cfg.threads = 4;
  const auto b = simulate_csbp(m, eig, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].masses == b[k].masses);
    CHECK(a[k].jumps.size() == b[k].jumps.size());
  }
}

TEST_CASE("configuration errors") {
  const Model m = single_type(1.0, 1.0, StablePowerLaw{1.0, 1.5});
  const auto eig = principal_eigentriple(m);
  SimConfig cfg;
  cfg.dt = 0.3;
  cfg.horizon = 1.0;
  CHECK_THROWS_AS(simulate_csbp(m, eig, cfg), ModelError);
  cfg.dt = 0.003;
  CHECK_THROWS_AS(simulate_csbp(m, eig, cfg), ModelError);
  SpineConfig sc;
  sc.dt = 0.01;
  sc.delta = 0.05;
  CHECK_THROWS_AS(simulate_spine(m, eig, sc), ModelError);
}

TEST_CASE("default threshold targets 0.1 large jumps per step") {
  const Model m = single_type(1.0, 0.0, StablePowerLaw{2.0, 1.5});
  const double eps = default_epsilon(m, 1e-3, 1.0);
  CHECK(kernel_tail(m.mech.kernels[0], eps) * 1e-3 == Approx(0.1).epsilon(1e-12));
}

TEST_CASE("oversized compensator is reported") {
  const Model m = single_type(0.0, 0.0, AtomList{{{1.0, 200.0}}});
  Eigentriple eig{1.0, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)};
  CHECK_THROWS_AS(CsbpStepper(m, eig, 0.01, 0.5, 64.0), NumericalError);
}

TEST_CASE("tilted generator is conservative with stationary law nu phi") {
  Rng rng = make_stream(5, 0, Stream::bootstrap);
  for (int trial = 0; trial < 5; ++trial) {
    const Model m = random_irreducible(rng, 3 + trial % 2);
    const auto eig = principal_eigentriple(m);
    const auto qt = tilted_generator(m, eig);
    CHECK(qt.q.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::VectorXd w = eig.nu.cwiseProduct(eig.phi);
    CHECK((qt.q.transpose() * w).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("spine diagnostics flag heavy small-immigrant mass") {
  SpineConfig cfg;
  const auto stable = spine_diagnostics(single_type(1.0, 0.0, StablePowerLaw{1.0, 1.5}), cfg);
  CHECK(stable.budget_exceeded);
  CHECK_FALSE(stable.warning.empty());
  const auto atoms = spine_diagnostics(single_type(1.0, 0.0, AtomList{{{0.5, 1.0}}}), cfg);
  CHECK_FALSE(atoms.budget_exceeded);
}

TEST_CASE("spine occupation follows nu phi") {
  const Model m = two_type(2.0, 0.5, AtomList{{{0.5, 1.0}}}, AtomList{{{1.0, 0.5}}}, 1.0, 0.5, 0.5);
  const auto eig = principal_eigentriple(m);
  SpineConfig cfg;
  cfg.dt = 1e-2;
  cfg.horizon = 2.0;
  cfg.paths = 4000;
  cfg.master_seed = 12;
  const auto paths = simulate_spine(m, eig, cfg);
  Eigen::Vector2d occ = Eigen::Vector2d::Zero();
  for (const auto& p : paths) {
    REQUIRE(p.spine_occupation.size() == 2);
    occ[0] += p.spine_occupation[0];
    occ[1] += p.spine_occupation[1];
  }
  CHECK(occ.sum() == Approx(cfg.horizon * cfg.paths).epsilon(1e-9));
  const Eigen::VectorXd w = eig.nu.cwiseProduct(eig.phi);
  CHECK(occ[0] / occ.sum() == Approx(w[0] / w.sum()).margin(0.02));
}

TEST_CASE("Galton-Watson martingale has unit mean") {
  const auto gw = GWModel::finite({0.25, 0.0, 0.75});
  const auto ens = simulate_gw(gw, 12, 20000, 9);
  for (int n : {1, 6, 12}) {
    std::vector<double> w;
    for (std::size_t p = 0; p < ens.paths(); ++p) w.push_back(ens.w(p, n));
    const auto mo = moments(w);
    CHECK(std::abs(mo.mean - 1.0) < 4.0 * mo.se);
  }
  // Extinction probability solves q = 1/4 + 3/4 q^2, so q = 1/3.
  int dead = 0;
  for (std::size_t p = 0; p < ens.paths(); ++p) dead += ens.w(p, 12) == 0.0;
  CHECK(double(dead) / ens.paths() == Approx(1.0 / 3.0).margin(0.015));
  const auto twins = simulate_gw(GWModel::finite({0.0, 0.0, 1.0}), 10, 5, 1);
  for (std::size_t p = 0; p < 5; ++p) CHECK(twins.w(p, 10) == 1.0);
}

TEST_CASE("power-law Galton-Watson keeps its mean across bins") {
  const auto gw = GWModel::power_law(1.5);
  const auto ens = simulate_gw(gw, 1, 400000, 21);
  std::vector<double> w;
  for (std::size_t p = 0; p < ens.paths(); ++p) {
    CHECK_FALSE(ens.flagged[p]);
    w.push_back(ens.w(p, 1));
  }
  // One generation: W_1 = Z / m, a heavy tail, so compare the truncated mean.
  double trunc = 0.0, oracle = 0.0;
  for (double x : w) trunc += std::min(x * gw.mean(), 1000.0);
  trunc /= w.size();
  for (long long k = 1; k < 1000; ++k) oracle += k * gw.prob(k);
  double tail = 0.0;
  for (long long k = 1000; k < 2000000; ++k) tail += gw.prob(k);
  oracle += 1000.0 * (tail + gw.c * std::pow(2e6, -1.5) / 1.5);
  CHECK(trunc == Approx(oracle).epsilon(0.03));
}
