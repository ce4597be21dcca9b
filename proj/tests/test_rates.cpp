#include "support.hpp"

using namespace supermart;
using namespace supermart::test;
using Catch::Approx;

namespace {

Curve curve_of(const std::vector<double>& t, double (*f)(double)) {
  Curve c;
  for (double x : t) {
    c.t.push_back(x);
    c.value.push_back(f(x));
    c.stderr_.push_back(0.0);
  }
  return c;
}

// Ensemble where M_t = Minf - Z_i e^{-r t} exactly.
Ensemble synthetic_ensemble(std::size_t n, double r, std::uint64_t seed) {
  Ensemble ens;
  ens.rate = 1.0;
  for (int k = 0; k <= 40; ++k) ens.times.push_back(0.25 * k);
  ens.horizon = 10.0;
  Rng rng = make_stream(seed, 0, Stream::bootstrap);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = normal(rng);
    std::vector<double> m;
    for (double t : ens.times) m.push_back(1.0 - z * std::exp(-r * t));
    ens.M.push_back(m);
    ens.Minf.push_back(1.0);
  }
  return ens;
}

}  // namespace

TEST_CASE("exponential fit recovers an exact slope") {
  std::vector<double> t;
  for (int k = 0; k < 20; ++k) t.push_back(0.5 * k);
  const auto fit = fit_exponential(curve_of(t, [](double x) { return 3.0 * std::exp(-0.7 * x); }), -0.7);
  CHECK(fit.exponent == Approx(-0.7).margin(1e-12));
  CHECK(fit.verdict == "consistent");
  CHECK(fit.r2 == Approx(1.0));
}

TEST_CASE("poor exponential fit is flagged") {
  std::vector<double> t;
  for (int k = 0; k <= 200; ++k) t.push_back(0.5 * k);
  const auto fit = fit_exponential(curve_of(t, [](double x) { return std::exp(-0.01 * x) * (1.0 + 0.95 * std::sin(x)); }), -0.1);
  CHECK(fit.r2 < 0.8);
  CHECK(fit.verdict == "inconclusive");
  const auto poly = fit_polynomial(curve_of({1, 2, 4, 8, 16}, [](double x) { return 5.0 / (x * x); }), -2.0);
  CHECK(poly.exponent == Approx(-2.0).margin(1e-12));
}

TEST_CASE("verdict tolerance") {
  std::vector<double> t{0, 1, 2, 3, 4};
  const auto c = curve_of(t, [](double x) { return std::exp(-1.1 * x); });
  CHECK(fit_exponential(c, -1.0).verdict == "consistent");
  CHECK(fit_exponential(c, -0.9).verdict == "inconsistent");
}

TEST_CASE("deterministic ensemble gives a zero curve") {
  Ensemble ens;
  ens.times = {0, 1, 2, 3, 4};
  ens.horizon = 4;
  ens.rate = 1.0;
  ens.M = {{1, 1, 1, 1, 1}, {1, 1, 1, 1, 1}};
  ens.Minf = {1, 1};
  const auto c = lp_curve(ens, 2.0, {1, 2});
  CHECK(c.value[0] == 0.0);
  CHECK(fit_exponential(c, -0.5).verdict == "consistent");
  const auto ex = as_rate_check(ens, 2.0, {0.1, 1.0}, {1.0});
  CHECK(ex.fraction[0][0] == 1.0);
  CHECK(ex.verdict == "holds");
  CHECK(poly_rate_check(ens, 1.0, {0.1}, {1.0}).pointwise.verdict == "holds");
  CHECK_THROWS_AS(lp_curve(ens, 2.0, {3}), ModelError);
}

TEST_CASE("L2 curve of a synthetic ensemble") {
  const auto ens = synthetic_ensemble(4000, 0.5, 1);
  std::vector<double> grid{1.0, 2.0, 3.0, 4.0, 5.0};
  const auto c = lp_curve(ens, 2.0, grid, 7);
  const auto fit = fit_exponential(c, -0.5);
  CHECK(fit.exponent == Approx(-0.5).margin(1e-9));
  // Bootstrap error halves when the path count quadruples.
  const auto big = lp_curve(synthetic_ensemble(16000, 0.5, 2), 2.0, grid, 7);
  CHECK(c.stderr_[0] / big.stderr_[0] == Approx(2.0).epsilon(0.3));
}

TEST_CASE("exceedance verdicts") {
  // e^{t/2} |Minf - M_t| = |Z| e^{-(r - 1/2) t}
  const auto fast = synthetic_ensemble(2000, 1.0, 3);
  CHECK(as_rate_check(fast, 2.0, {0.1, 1.0, 10.0}, {1.0, 2.0}).verdict == "holds");
  const auto slow = synthetic_ensemble(2000, 0.0, 4);
  const auto r = as_rate_check(slow, 2.0, {0.1, 1.0, 10.0}, {1.0, 2.0});
  CHECK(r.verdict == "fails-consistent");
}

TEST_CASE("compensated sum") {
  std::vector<double> v{1e16, 1.0, -1e16, 1.0};
  CHECK(stable_sum(v) == 2.0);
}

TEST_CASE("window law on a deterministic symmetric model") {
  const Model m = two_type(1.0, 1.0, StablePowerLaw{0, 1.5}, StablePowerLaw{0, 1.5});
  const auto eig = principal_eigentriple(m);
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.horizon = 4.0;
  cfg.paths = 2;
  const auto paths = simulate_csbp(m, eig, cfg);
  const auto r = window_law_check(paths, eig, {0}, {0, 1, 2});
  CHECK(r.target == Approx(0.5));
  CHECK(r.survival == 1.0);
  CHECK(r.mad.back() < 1e-12);
  CHECK(r.verdict == "consistent");
}

TEST_CASE("Galton-Watson ensemble uses generations as time") {
  const auto gw = simulate_gw(GWModel::finite({0.25, 0.0, 0.75}), 10, 2000, 5);
  const auto ens = ensemble_from_gw(gw);
  CHECK(ens.rate == Approx(std::log(1.5)));
  CHECK(ens.horizon == 10.0);
  const auto c = lp_curve(ens, 1.0, {1, 2, 3, 4, 5});
  for (std::size_t k = 0; k + 1 < c.value.size(); ++k) CHECK(c.value[k + 1] < c.value[k]);
}
