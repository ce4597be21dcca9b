#include <cmath>
#include <functional>

#include "supermart/scenario.hpp"

namespace supermart {

namespace {

Model two_type(double b1, double b2, JumpKernel k1, JumpKernel k2, double a1 = 0.0,
               double a2 = 0.0) {
  Model m;
  m.space.d = 2;
  m.motion.q = (Eigen::MatrixXd(2, 2) << -1.0, 1.0, 1.0, -1.0).finished();
  m.mech.beta = Eigen::Vector2d(b1, b2);
  m.mech.alpha = Eigen::Vector2d(a1, a2);
  m.mech.kernels = {std::move(k1), std::move(k2)};
  return m;
}

Model random_model(Rng& rng, int d) {
  Model m;
  m.space.d = d;
  m.motion.q = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    double row = 0.0;
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      m.motion.q(i, j) = 0.1 + 1.9 * uniform01(rng);
      row += m.motion.q(i, j);
    }
    m.motion.q(i, i) = -row;
  }
  m.mech.beta.resize(d);
  m.mech.alpha.resize(d);
  for (int i = 0; i < d; ++i) {
    m.mech.beta[i] = 0.2 + 1.8 * uniform01(rng);
    m.mech.alpha[i] = uniform01(rng);
    m.mech.kernels.push_back(StablePowerLaw{uniform01(rng), 1.1 + 0.8 * uniform01(rng)});
  }
  return m;
}

struct Suite {
  json checks = json::array();
  bool pass = true;

  void check(const std::string& name, double value, double tolerance, bool ok) {
    checks.push_back({{"name", name}, {"value", extended(value)}, {"tolerance", tolerance}, {"pass", ok}});
    pass = pass && ok;
  }
  void at_most(const std::string& name, double value, double tolerance) {
    check(name, value, tolerance, value <= tolerance);
  }
};

void eigen_suite(Suite& s) {
  std::vector<Model> models{two_type(1, 1, StablePowerLaw{0, 1.5}, StablePowerLaw{0, 1.5}),
                            two_type(2, 0, StablePowerLaw{0, 1.5}, StablePowerLaw{0, 1.5})};
  Rng rng = make_stream(7, 0, Stream::bootstrap);
  for (int k = 0; k < 5; ++k) models.push_back(random_model(rng, 2 + k % 4));
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto& m = models[k];
    const auto eig = principal_eigentriple(m);
    const auto a = mean_generator(m);
    const std::string tag = "model " + std::to_string(k + 1);
    s.at_most(tag + " right residual", (a * eig.phi - eig.lambda * eig.phi).cwiseAbs().maxCoeff() /
                                           eig.phi.cwiseAbs().maxCoeff(), 1e-10);
    s.at_most(tag + " left residual",
              (a.transpose() * eig.nu - eig.lambda * eig.nu).cwiseAbs().maxCoeff() /
                  eig.nu.cwiseAbs().maxCoeff(), 1e-10);
    const Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(m.dim(), 1.0, 2.0);
    const Eigen::VectorXd two_steps = semigroup_apply(m, 0.7, semigroup_apply(m, 0.3, f));
    const Eigen::VectorXd one_step = semigroup_apply(m, 1.0, f);
    s.at_most(tag + " semigroup law", (two_steps - one_step).cwiseAbs().maxCoeff() /
                                          one_step.cwiseAbs().maxCoeff(), 1e-9);
    const double gap = spectral_gap(m, eig);
    if (std::isfinite(gap)) s.at_most(tag + " c at 10/gap", c_of_t(m, eig, 10.0 / gap), 1e-3);
  }
}

void transform_suite(Suite& s) {
  Rng rng = make_stream(11, 0, Stream::bootstrap);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    AtomList atoms;
    for (int k = 0; k < 4; ++k) atoms.atoms.push_back({0.1 + 5.0 * uniform01(rng), uniform01(rng)});
    const double phi = 0.2 + 3.0 * uniform01(rng);
    const double t = 0.05 + 10.0 * uniform01(rng);
    const auto transformed = phi_transform(atoms, phi);
    worst = std::max(worst, std::abs(kernel_tail(transformed, t) - kernel_tail(atoms, t / phi)));
  }
  s.at_most("atom phi-transform tail identity", worst, 0.0);
  for (double alpha : {1.1, 1.5, 1.9}) {
    for (double gamma : {0.5, 1.0, 2.0}) {
      Model m;
      m.space.d = 1;
      m.motion.q = Eigen::MatrixXd::Zero(1, 1);
      m.mech.beta = Eigen::VectorXd::Constant(1, 1.0);
      m.mech.alpha = Eigen::VectorXd::Zero(1);
      m.mech.kernels = {StablePowerLaw{gamma, alpha}};
      const auto eig = principal_eigentriple(m);
      const std::string tag = "alpha=" + format_double(alpha) + " gamma=" + format_double(gamma);
      auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
      s.at_most(tag + " llogl", rel(llogl_quadrature(m, eig), llogl(m, eig)), 1e-8);
      const double p = 1.0 + 0.5 * (alpha - 1.0);
      s.at_most(tag + " p-moment", rel(p_moment_quadrature(m, eig, p), p_moment(m, eig, p)), 1e-8);
      s.at_most(tag + " log-moment", rel(log_moment_quadrature(m, eig, 0.5), log_moment(m, eig, 0.5)), 1e-8);
    }
  }
}

void martingale_suite(Suite& s, int threads) {
  const Model m = two_type(1.0, 0.5, StablePowerLaw{1.0, 1.5}, StablePowerLaw{0.5, 1.5}, 0.5, 0.5);
  const auto eig = principal_eigentriple(m);
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.horizon = 4.0;
  cfg.paths = 4000;
  cfg.epsilon = 0.5;
  cfg.master_seed = 2024;
  cfg.threads = threads;
  const auto paths = simulate_csbp(m, eig, cfg);
  for (double t : {1.0, 2.0, 4.0}) {
    const auto k = static_cast<std::size_t>(std::llround(t / cfg.dt));
    double sum = 0.0, sq = 0.0;
    for (const auto& p : paths) {
      sum += p.M[k];
      sq += p.M[k] * p.M[k];
    }
    const double n = static_cast<double>(paths.size());
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / (n - 1.0));
    s.at_most("mean of M at t=" + format_double(t) + " in standard errors",
              std::abs(mean - paths[0].M[0]) / se, 4.0);
  }
}

void identities_suite(Suite& s, int threads) {
  // Smooth synthetic path with known limit.
  PathRecord syn;
  syn.d = 1;
  for (int k = 0; k <= 2000; ++k) {
    const double t = k * 1e-3;
    syn.times.push_back(t);
    syn.M.push_back(1.0 - std::exp(-t));
    syn.masses.push_back(0.0);
  }
  Eigentriple unit{1.0, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)};
  const double e1 = std::abs(exponential_identity_residual(syn, unit, 1.0, 2.0));
  const double e2 = std::abs(exponential_identity_residual(subsample(syn, 2), unit, 1.0, 2.0));
  const double p1 = std::abs(polynomial_identity_residual(syn, unit, 1.0, 1.0));
  const double p2 = std::abs(polynomial_identity_residual(subsample(syn, 2), unit, 1.0, 1.0));
  s.at_most("synthetic exponential identity", e1, 2e-3);
  s.check("synthetic exponential identity halving ratio", e2 / e1, 1.8, e2 / e1 >= 1.8);
  s.at_most("synthetic polynomial identity", p1, 2e-3);
  s.check("synthetic polynomial identity halving ratio", p2 / p1, 1.8, p2 / p1 >= 1.8);

  const Model m = two_type(1.0, 0.5, StablePowerLaw{1.0, 1.5}, StablePowerLaw{0.5, 1.5}, 0.5, 0.5);
  const auto eig = principal_eigentriple(m);
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 2.0;
  cfg.paths = 40;
  cfg.epsilon = 0.5;
  cfg.master_seed = 99;
  cfg.log_jumps = true;
  cfg.threads = threads;
  const auto paths = simulate_csbp(m, eig, cfg);
  for (int which = 0; which < 2; ++which) {
    double res[3] = {0, 0, 0};
    const int strides[3] = {4, 2, 1};
    for (const auto& p : paths) {
      const double minf = estimate_Minfty(p);
      for (int k = 0; k < 3; ++k) {
        const auto sub = subsample(p, strides[k]);
        res[k] += std::abs(which == 0 ? exponential_identity_residual(sub, eig, minf, 1.5)
                                      : polynomial_identity_residual(sub, eig, minf, 1.0));
      }
    }
    const std::string name = which == 0 ? "exponential identity" : "polynomial identity";
    s.check(name + " ratio 4e-3/2e-3", res[0] / res[1], 1.8, res[0] / res[1] >= 1.8);
    s.check(name + " ratio 2e-3/1e-3", res[1] / res[2], 1.8, res[1] / res[2] >= 1.8);
  }
}

void spine_suite(Suite& s, int threads) {
  const Model m = two_type(2.0, 0.0, AtomList{{{0.5, 1.0}}}, AtomList{{{1.0, 0.5}}}, 1.0, 0.5);
  const auto eig = principal_eigentriple(m);
  const auto qt = tilted_generator(m, eig);
  const Eigen::VectorXd w = eig.nu.cwiseProduct(eig.phi);
  s.at_most("tilted generator stationary law", (qt.q.transpose() * w).cwiseAbs().maxCoeff(), 1e-12);

  SpineConfig cfg;
  cfg.dt = 1e-2;
  cfg.horizon = 1.0;
  cfg.paths = 20000;
  cfg.epsilon = 0.1;
  cfg.master_seed = 5;
  cfg.threads = threads;
  cfg.delta = 1e-3;
  cfg.delta_m = 1e-2;
  const auto q_paths = simulate_spine(m, eig, cfg);
  SimConfig plain = cfg;
  plain.master_seed = 6;
  const auto p_paths = simulate_csbp(m, eig, plain);

  auto stats = [](const std::vector<double>& v) {
    double sum = 0.0, sq = 0.0;
    for (double x : v) {
      sum += x;
      sq += x * x;
    }
    const double n = static_cast<double>(v.size());
    const double mean = sum / n;
    return std::make_pair(mean, std::sqrt((sq / n - mean * mean) / (n - 1.0)));
  };
  std::vector<double> qv, pv;
  for (const auto& p : q_paths) qv.push_back(p.M.back());
  for (const auto& p : p_paths) pv.push_back(p.M.back() * p.M.back() / p.M.front());
  const auto [qm, qs] = stats(qv);
  const auto [pm, ps] = stats(pv);
  const double gap = std::abs(qm - pm);
  s.check("size-biased mean gap over summed 95% half-widths", gap / (1.96 * (qs + ps)), 1.0,
          gap <= 1.96 * (qs + ps));

  Eigen::VectorXd occ = Eigen::VectorXd::Zero(2);
  for (const auto& p : q_paths)
    for (int i = 0; i < 2; ++i) occ[i] += p.spine_occupation[i];
  occ /= occ.sum();
  s.at_most("spine occupation vs nu*phi", (occ - w / w.sum()).cwiseAbs().maxCoeff(), 0.02);
}

}  // namespace

VerifyResult verify_suite(const std::string& suite, int threads) {
  Suite s;
  if (suite == "eigen") {
    eigen_suite(s);
  } else if (suite == "transform") {
    transform_suite(s);
  } else if (suite == "martingale") {
    martingale_suite(s, threads);
  } else if (suite == "identities") {
    identities_suite(s, threads);
  } else if (suite == "spine") {
    spine_suite(s, threads);
  } else {
    throw SchemaError("", "unknown suite \"" + suite + "\"");
  }
  return {s.pass, {{"suite", suite}, {"pass", s.pass}, {"checks", s.checks}}};
}

}  // namespace supermart
