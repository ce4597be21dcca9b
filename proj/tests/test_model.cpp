#include <boost/math/special_functions/zeta.hpp>

#include "support.hpp"

using namespace supermart;
using namespace supermart::test;
using Catch::Approx;

TEST_CASE("stable partial moments agree with r-space quadrature") {
  for (double alpha : {1.1, 1.5, 1.9}) {
    const StablePowerLaw s{0.7, alpha};
    auto density = [&](double r) { return 0.7 * std::pow(r, -1.0 - alpha); };
    for (double k : {0.5, 1.0, 2.5}) {
      const double lo = 0.3, hi = 7.0;
      const double oracle = quad([&](double r) { return std::pow(r, k) * density(r); }, lo, hi);
      CHECK(rel(kernel_partial_moment(s, k, lo, hi), oracle) < 1e-10);
    }
    const double tail = quad([&](double r) { return r * density(r); }, 2.0, kInf);
    CHECK(rel(kernel_partial_moment(s, 1.0, 2.0, kInf), tail) < 1e-10);
    CHECK(rel(kernel_tail(s, 2.0), quad(density, 2.0, kInf)) < 1e-10);
  }
}

TEST_CASE("divergent stable moments are infinite") {
  const StablePowerLaw s{1.0, 1.5};
  CHECK(std::isinf(kernel_partial_moment(s, 1.0, 0.0, 1.0)));
  CHECK(std::isinf(kernel_partial_moment(s, 1.5, 1.0, kInf)));
  CHECK(std::isinf(kernel_partial_moment(s, 1.8, 1.0, kInf)));
  CHECK(std::isfinite(kernel_partial_moment(s, 2.0, 0.0, 1.0)));
}

TEST_CASE("kernel_integral matches independent quadrature") {
  const StablePowerLaw s{1.3, 1.4};
  auto f = [](double r) { return r * std::log(r) * std::log(r); };
  // r = e^u turns the tail into u^2 e^{-0.4 u}.
  const double oracle = quad([](double u) { return 1.3 * u * u * std::exp(-0.4 * u); }, 0.0, kInf);
  CHECK(rel(oracle, 1.3 * 2.0 / std::pow(0.4, 3)) < 1e-10);
  CHECK(rel(kernel_integral(s, f, 1.0, kInf), oracle) < 1e-9);
  const double near = quad([](double r) { return r > 0.0 ? 1.3 * std::pow(r, -0.4) : 0.0; }, 0.0, 1.0);
  CHECK(rel(near, 1.3 / 0.6) < 1e-10);
  CHECK(rel(kernel_integral(s, [](double r) { return r * r; }, 0.0, 1.0), near) < 1e-9);
}

TEST_CASE("atom intervals are half open on the left") {
  const AtomList a{{{1.0, 2.0}, {3.0, 5.0}}};
  CHECK(kernel_partial_moment(a, 1.0, 1.0, 3.0) == 15.0);
  CHECK(kernel_partial_moment(a, 1.0, 0.5, 1.0) == 2.0);
  CHECK(kernel_tail(a, 1.0) == 5.0);
  CHECK(kernel_tail(a, 0.999) == 7.0);
  CHECK(kernel_integral(a, [](double r) { return r * r; }, 0.0, kInf) == 2.0 + 45.0);
}

TEST_CASE("phi transform scales sizes") {
  const StablePowerLaw s{0.8, 1.6};
  const auto t = std::get<StablePowerLaw>(phi_transform(s, 2.5));
  CHECK(t.gamma == Approx(0.8 * std::pow(2.5, 1.6)).epsilon(1e-14));
  for (double x : {0.1, 1.0, 40.0})
    CHECK(rel(kernel_tail(t, x), kernel_tail(s, x / 2.5)) < 1e-13);
  const AtomList a{{{1.0, 2.0}, {3.0, 5.0}}};
  const auto ta = std::get<AtomList>(phi_transform(a, 0.5));
  CHECK(ta.atoms[1].mass == 1.5);
  CHECK(ta.atoms[1].rate == 5.0);
}

TEST_CASE("validation computes the bounded-variation integral") {
  Model m = single_type(1.0, 0.0, StablePowerLaw{1.0, 1.5});
  const auto report = validate_model(m);
  REQUIRE(report.ok);
  const double oracle = quad([](double r) { return std::pow(r, -0.5); }, 0.0, 1.0) +
                        quad([](double r) { return std::pow(r, -1.5); }, 1.0, kInf);
  CHECK(report.r_wedge_r2[0] == Approx(oracle).epsilon(1e-10));
  CHECK(report.r_wedge_r2[0] == Approx(4.0).epsilon(1e-12));
}

TEST_CASE("validation failures") {
  SECTION("non-conservative rows") {
    Model m = two_type(1, 1, StablePowerLaw{0, 1.5}, StablePowerLaw{0, 1.5});
    m.motion.q(0, 0) = -0.5;
    const auto r = validate_model(m);
    REQUIRE_FALSE(r.ok);
    CHECK(r.failures[0].code == "non-conservative");
    CHECK(r.failures[0].message.find("row 1") != std::string::npos);
  }
  SECTION("reducible motion") {
    Model m = two_type(1, 1, StablePowerLaw{0, 1.5}, StablePowerLaw{0, 1.5});
    m.motion.q(1, 0) = 0.0;
    m.motion.q(1, 1) = 0.0;
    const auto r = validate_model(m);
    REQUIRE_FALSE(r.ok);
    CHECK(r.failures[0].code == "reducible");
  }
  SECTION("bad kernel and alpha") {
    Model m = single_type(1.0, -1.0, StablePowerLaw{1.0, 2.5});
    const auto r = validate_model(m);
    REQUIRE_FALSE(r.ok);
    std::vector<std::string> codes;
    for (const auto& f : r.failures) codes.push_back(f.code);
    CHECK(std::find(codes.begin(), codes.end(), "negative-alpha") != codes.end());
    CHECK(std::find(codes.begin(), codes.end(), "invalid-kernel") != codes.end());
  }
  SECTION("negative rate") {
    Model m = two_type(1, 1, StablePowerLaw{0, 1.5}, StablePowerLaw{0, 1.5});
    m.motion.q << 1.0, -1.0, 1.0, -1.0;
    CHECK(validate_model(m).failures[0].code == "negative-rate");
  }
}

TEST_CASE("irreducibility needs both directions") {
  Eigen::MatrixXd q(3, 3);
  q << -1, 1, 0, 0, -1, 1, 1, 0, -1;
  CHECK(is_irreducible(q));
  q(2, 0) = 0.0;
  q(2, 2) = 0.0;
  CHECK_FALSE(is_irreducible(q));
}

TEST_CASE("tail sampler follows the normalized tail law") {
  const StablePowerLaw s{1.0, 1.5};
  Rng rng = make_stream(1, 0, Stream::jumps);
  const int n = 200000;
  int above = 0;
  for (int k = 0; k < n; ++k) {
    const double x = sample_tail(s, 0.2, rng);
    REQUIRE(x > 0.2);
    above += x > 0.4;
  }
  const double p = std::pow(2.0, -1.5);
  CHECK(std::abs(double(above) / n - p) < 5.0 * std::sqrt(p * (1 - p) / n));
  CHECK_THROWS_AS(sample_tail(AtomList{{{0.1, 1.0}}}, 0.5, rng), ModelError);
}

TEST_CASE("size-biased sampler weights atoms by size") {
  const AtomList a{{{0.5, 2.0}, {2.0, 1.0}}};
  Rng rng = make_stream(2, 0, Stream::jumps);
  const int n = 100000;
  int big = 0;
  for (int k = 0; k < n; ++k) big += sample_size_biased(a, 0.0, kInf, rng) == 2.0;
  const double p = 2.0 / 3.0;
  CHECK(std::abs(double(big) / n - p) < 5.0 * std::sqrt(p * (1 - p) / n));

  // Stable: density proportional to y^-alpha on (lo, hi]; check the mean.
  const StablePowerLaw s{1.0, 1.5};
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += sample_size_biased(s, 0.01, 1.0, rng);
  const double z = quad([](double y) { return std::pow(y, -1.5); }, 0.01, 1.0);
  const double mean = quad([](double y) { return std::pow(y, -0.5); }, 0.01, 1.0) / z;
  CHECK(sum / n == Approx(mean).epsilon(0.02));
}

TEST_CASE("power-law offspring law") {
  const auto g = GWModel::power_law(1.3);
  double total = 0.0, mean = 0.0;
  for (long long k = 1; k <= 2000000; ++k) {
    total += g.prob(k);
    mean += k * g.prob(k);
  }
  CHECK(total == Approx(1.0).epsilon(1e-6));
  CHECK(g.mean() == Approx(boost::math::zeta(1.3) / boost::math::zeta(2.3)).epsilon(1e-12));
  CHECK(g.mean() > mean);
  const auto f = GWModel::finite({0.25, 0.0, 0.75});
  CHECK(f.mean() == 1.5);
  CHECK(f.prob(3) == 0.0);
}
