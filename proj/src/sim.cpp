#include "supermart/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "supermart/parallel.hpp"

namespace supermart {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFineSplit = 1e-2;

std::int64_t step_count(const SimConfig& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.horizon > 0.0)) throw ModelError("dt and horizon must be positive");
  if (cfg.dt > 0.01 * cfg.horizon + 1e-15) throw ModelError("dt must not exceed 0.01 * horizon");
  if (cfg.record_stride < 1) throw ModelError("record_stride must be at least 1");
  const double ratio = cfg.horizon / cfg.dt;
  const auto n = static_cast<std::int64_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(n)) > 1e-6 * ratio)
    throw ModelError("horizon must be an integer multiple of dt");
  return n;
}

Eigen::VectorXd initial_mass(const Eigentriple& eig, const SimConfig& cfg, int d) {
  if (cfg.x0.size() == 0) return eig.nu;
  if (cfg.x0.size() != d) throw ModelError("x0 has wrong dimension");
  if ((cfg.x0.array() < 0.0).any()) throw ModelError("x0 must be non-negative");
  return cfg.x0;
}

double resolve_epsilon(const Model& model, const Eigentriple& eig, const SimConfig& cfg) {
  if (cfg.epsilon > 0.0) return cfg.epsilon;
  return default_epsilon(model, cfg.dt, initial_mass(eig, cfg, model.dim()).sum());
}

void record(PathRecord& rec, double t, const Eigen::VectorXd& x, const Eigentriple& eig) {
  rec.times.push_back(t);
  for (int i = 0; i < rec.d; ++i) rec.masses.push_back(x[i]);
  rec.M.push_back(std::exp(-eig.lambda * t) * eig.phi.dot(x));
}

PathRecord start_record(std::int64_t path_id, int d, std::int64_t steps, int stride) {
  PathRecord rec;
  rec.path_id = path_id;
  rec.d = d;
  const std::size_t n = static_cast<std::size_t>(steps / stride + 2);
  rec.times.reserve(n);
  rec.M.reserve(n);
  rec.masses.reserve(n * d);
  return rec;
}

int sample_index(const Eigen::VectorXd& weights, Rng& rng) {
  double u = uniform01(rng) * weights.sum();
  for (int i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return static_cast<int>(weights.size()) - 1;
}

double exponential(Rng& rng, double rate) {
  if (!(rate > 0.0)) return kInf;
  return -std::log(uniform01(rng)) / rate;
}

}  // namespace

double default_epsilon(const Model& model, double dt, double mass) {
  constexpr double kTarget = 0.1;
  mass = std::max(mass, 1e-12);
  double eps = kInf;
  for (const auto& kernel : model.mech.kernels) {
    double e = 1.0;
    if (const auto* s = std::get_if<StablePowerLaw>(&kernel)) {
      if (s->gamma > 0.0) e = std::pow(s->gamma * mass * dt / (kTarget * s->alpha), 1.0 / s->alpha);
    } else {
      const auto& atoms = std::get<AtomList>(kernel).atoms;
      if (atoms.empty()) continue;
      double total = 0.0, smallest = kInf, largest = 0.0;
      for (const auto& a : atoms) {
        total += a.rate;
        smallest = std::min(smallest, a.mass);
        largest = std::max(largest, a.mass);
      }
      e = total * mass * dt <= kTarget ? 0.5 * smallest : largest;
    }
    eps = std::min(eps, e);
  }
  return std::isfinite(eps) ? eps : 1.0;
}

CsbpStepper::CsbpStepper(const Model& model, const Eigentriple& /*eig*/, double dt,
                         double epsilon, double exact_mass_factor)
    : model_(&model), dt_(dt), epsilon_(epsilon), exact_factor_(exact_mass_factor) {
  const int d = model.dim();
  if (!(epsilon > 0.0)) throw ModelError("epsilon must be positive");
  e_ = semigroup_matrix(model, dt).transpose();
  for (double eps = epsilon;; eps *= 4.0) {
    Level lv{eps, Eigen::VectorXd(d), Eigen::VectorXd(d), Eigen::VectorXd(d)};
    for (int i = 0; i < d; ++i) {
      const auto& kernel = model.mech.kernels[i];
      lv.v[i] = model.mech.alpha[i] + kernel_partial_moment(kernel, 2.0, 0.0, eps);
      lv.self[i] = e_(i, i) - dt * kernel_partial_moment(kernel, 1.0, eps, kInf);
      lv.jump_rate[i] = kernel_tail(kernel, eps);
      if (!(lv.self[i] > 0.0)) {
        std::ostringstream os;
        os << "large-jump compensator exceeds the step for type " << i + 1
           << "; reduce dt or raise epsilon";
        throw NumericalError(os.str());
      }
    }
    const bool last = lv.jump_rate.maxCoeff() == 0.0 || levels_.size() == 40;
    levels_.push_back(std::move(lv));
    if (last) break;
  }
}

void CsbpStepper::step(Eigen::VectorXd& x, double t_end, Streams& streams,
                       std::vector<JumpEvent>* jumps, double& clipped) const {
  const int d = static_cast<int>(x.size());
  Eigen::VectorXd y(d);
  for (int i = 0; i < d; ++i) {
    double inflow = 0.0;
    for (int j = 0; j < d; ++j)
      if (j != i) inflow += e_(i, j) * x[j];
    const double xi = x[i];
    const double z = streams.normal(streams.diffusion);
    double yi = 0.0;
    if (xi > 0.0) {
      std::size_t k = 0;
      while (k + 1 < levels_.size() && xi * levels_[k].jump_rate[i] * dt_ > kMaxJumpsPerStep) ++k;
      const Level& lv = levels_[k];
      const double s = lv.self[i];
      const double v = lv.v[i];
      if (v == 0.0) {
        yi = s * xi;
      } else if (xi >= exact_factor_ * v * dt_) {
        yi = s * xi + std::sqrt(v * xi * dt_) * z;
      } else {
        // Exact Feller transition: Poisson number of exponential clusters.
        const double b = std::log(s) / dt_;
        const double c = std::abs(b * dt_) < 1e-12 ? 0.5 * v * dt_ : v * (s - 1.0) / (2.0 * b);
        const std::int64_t n = poisson(streams.exact, xi * s / c);
        if (n > 0) {
          std::gamma_distribution<double> g(static_cast<double>(n), c);
          yi = g(streams.exact);
        }
      }
      if (lv.jump_rate[i] > 0.0) {
        const std::int64_t n = poisson(streams.jumps, xi * lv.jump_rate[i] * dt_);
        for (std::int64_t j = 0; j < n; ++j) {
          const double r = sample_tail(model_->mech.kernels[i], lv.epsilon, streams.jumps);
          yi += r;
          if (jumps) jumps->push_back({t_end, i, r});
        }
      }
    }
    yi += inflow;
    if (yi < 0.0) {
      clipped += -yi;
      yi = 0.0;
    }
    y[i] = yi;
  }
  x = std::move(y);
}

PathRecord simulate_csbp_path(const Model& model, const Eigentriple& eig, const SimConfig& cfg,
                              const CsbpStepper& stepper, std::int64_t path_id) {
  const int d = model.dim();
  const std::int64_t steps = step_count(cfg);
  PathRecord rec = start_record(path_id, d, steps, cfg.record_stride);
  CsbpStepper::Streams streams{make_stream(cfg.master_seed, path_id, Stream::diffusion),
                               make_stream(cfg.master_seed, path_id, Stream::exact_transition),
                               make_stream(cfg.master_seed, path_id, Stream::jumps),
                               std::normal_distribution<double>(0.0, 1.0)};
  Eigen::VectorXd x = initial_mass(eig, cfg, d);
  record(rec, 0.0, x, eig);
  for (std::int64_t s = 1; s <= steps; ++s) {
    const double t = static_cast<double>(s) * cfg.dt;
    if (!x.isZero(0.0)) stepper.step(x, t, streams, cfg.log_jumps ? &rec.jumps : nullptr, rec.clipped);
    if (s % cfg.record_stride == 0 || s == steps) record(rec, t, x, eig);
  }
  rec.flagged = rec.clipped >= 1e-6 * initial_mass(eig, cfg, d).sum() * cfg.horizon;
  return rec;
}

std::vector<PathRecord> simulate_csbp(const Model& model, const Eigentriple& eig,
                                      const SimConfig& cfg) {
  const double eps = resolve_epsilon(model, eig, cfg);
  const CsbpStepper stepper(model, eig, cfg.dt, eps, cfg.exact_mass_factor);
  step_count(cfg);
  std::vector<PathRecord> out(static_cast<std::size_t>(cfg.paths));
  parallel_for(cfg.paths, cfg.threads, [&](std::int64_t p) {
    out[static_cast<std::size_t>(p)] = simulate_csbp_path(model, eig, cfg, stepper, p);
  });
  return out;
}

RateMatrix tilted_generator(const Model& model, const Eigentriple& eig) {
  const int d = model.dim();
  RateMatrix out{Eigen::MatrixXd::Zero(d, d)};
  for (int i = 0; i < d; ++i) {
    double row = 0.0;
    for (int j = 0; j < d; ++j) {
      if (j == i) continue;
      out.q(i, j) = model.motion.q(i, j) * eig.phi[j] / eig.phi[i];
      row += out.q(i, j);
    }
    out.q(i, i) = -row;
  }
  return out;
}

SpineDiagnostics spine_diagnostics(const Model& model, const SpineConfig& cfg) {
  SpineDiagnostics diag;
  double worst = 0.0;
  for (int i = 0; i < model.dim(); ++i) {
    const auto& kernel = model.mech.kernels[i];
    const double lost = kernel_partial_moment(kernel, 1.0, 0.0, cfg.delta_m);
    const double total = kernel_partial_moment(kernel, 1.0, 0.0, kInf);
    const double share = lost == 0.0 ? 0.0 : lost / total;
    if (std::isnan(share) || share >= worst) {
      worst = std::isnan(share) ? kInf : share;
      diag.truncated_first_moment = lost;
      diag.total_first_moment = total;
    }
  }
  if (worst > 0.01) {
    diag.budget_exceeded = true;
    std::ostringstream os;
    os << "discrete immigrants below delta_m=" << cfg.delta_m << " carry first moment "
       << diag.truncated_first_moment << " of " << diag.total_first_moment
       << " (more than 1%)";
    diag.warning = os.str();
  }
  return diag;
}

std::vector<PathRecord> simulate_spine(const Model& model, const Eigentriple& eig,
                                       const SpineConfig& cfg) {
  if (!(cfg.delta > 0.0 && cfg.delta <= kFineSplit) ||
      !(cfg.delta_m > 0.0 && cfg.delta_m <= kFineSplit))
    throw ModelError("delta and delta_m must lie in (0, 0.01]");
  const int d = model.dim();
  const std::int64_t steps = step_count(cfg);
  const double eps = resolve_epsilon(model, eig, cfg);
  const CsbpStepper stepper(model, eig, cfg.dt, eps, cfg.exact_mass_factor);
  const RateMatrix qt = tilted_generator(model, eig);
  const Eigen::VectorXd x0 = initial_mass(eig, cfg, d);
  const Eigen::VectorXd start_weights = eig.phi.cwiseProduct(x0);
  if (!(start_weights.sum() > 0.0)) throw ModelError("initial measure has zero phi-mass");

  Eigen::VectorXd coarse_rate(d), fine_rate(d);
  for (int i = 0; i < d; ++i) {
    const auto& kernel = model.mech.kernels[i];
    coarse_rate[i] = kernel_partial_moment(kernel, 1.0, kFineSplit, kInf);
    fine_rate[i] = cfg.delta_m < kFineSplit
                       ? kernel_partial_moment(kernel, 1.0, cfg.delta_m, kFineSplit)
                       : 0.0;
  }

  std::vector<PathRecord> out(static_cast<std::size_t>(cfg.paths));
  parallel_for(cfg.paths, cfg.threads, [&](std::int64_t path_id) {
    PathRecord rec = start_record(path_id, d, steps, cfg.record_stride);
    rec.spine_occupation.assign(d, 0.0);
    const auto seed = cfg.master_seed;
    CsbpStepper::Streams streams{make_stream(seed, path_id, Stream::diffusion),
                                 make_stream(seed, path_id, Stream::exact_transition),
                                 make_stream(seed, path_id, Stream::jumps),
                                 std::normal_distribution<double>(0.0, 1.0)};
    Rng motion = make_stream(seed, path_id, Stream::spine_motion);
    Rng continuum = make_stream(seed, path_id, Stream::continuum_immigration);
    Rng coarse = make_stream(seed, path_id, Stream::coarse_immigration);
    Rng fine = make_stream(seed, path_id, Stream::fine_immigration);

    int spine = sample_index(start_weights, motion);
    double next_move = exponential(motion, -qt.q(spine, spine));
    Eigen::VectorXd x = x0;
    std::vector<double> occ(d);
    record(rec, 0.0, x, eig);
    for (std::int64_t s = 1; s <= steps; ++s) {
      const double t0 = static_cast<double>(s - 1) * cfg.dt;
      const double t1 = static_cast<double>(s) * cfg.dt;
      std::fill(occ.begin(), occ.end(), 0.0);
      double t = t0;
      while (next_move <= t1) {
        occ[spine] += next_move - t;
        t = next_move;
        Eigen::VectorXd row = qt.q.row(spine).transpose();
        row[spine] = 0.0;
        spine = sample_index(row, motion);
        next_move = t + exponential(motion, -qt.q(spine, spine));
      }
      occ[spine] += t1 - t;

      for (int i = 0; i < d; ++i) {
        rec.spine_occupation[i] += occ[i];
        if (occ[i] <= 0.0) continue;
        const auto& kernel = model.mech.kernels[i];
        if (model.mech.alpha[i] > 0.0)
          x[i] += cfg.delta * static_cast<double>(
                                  poisson(continuum, model.mech.alpha[i] * occ[i] / cfg.delta));
        if (coarse_rate[i] > 0.0) {
          const std::int64_t n = poisson(coarse, coarse_rate[i] * occ[i]);
          for (std::int64_t k = 0; k < n; ++k)
            x[i] += sample_size_biased(kernel, kFineSplit, kInf, coarse);
        }
        if (fine_rate[i] > 0.0) {
          const std::int64_t n = poisson(fine, fine_rate[i] * occ[i]);
          for (std::int64_t k = 0; k < n; ++k)
            x[i] += sample_size_biased(kernel, cfg.delta_m, kFineSplit, fine);
        }
      }
      stepper.step(x, t1, streams, cfg.log_jumps ? &rec.jumps : nullptr, rec.clipped);
      if (s % cfg.record_stride == 0 || s == steps) record(rec, t1, x, eig);
    }
    rec.flagged = rec.clipped >= 1e-6 * x0.sum() * cfg.horizon;
    out[static_cast<std::size_t>(path_id)] = std::move(rec);
  });
  return out;
}

namespace {

// sum_{k=a}^{b-1} k^(-s) for integers 32 <= a < b, by Euler-Maclaurin.
double power_sum(double a, double b, double s) {
  if (b - a <= 64.0) {
    double sum = 0.0;
    for (double k = b - 1.0; k >= a; k -= 1.0) sum += std::pow(k, -s);
    return sum;
  }
  auto f = [&](double x) { return std::pow(x, -s); };
  auto d1 = [&](double x) { return -s * std::pow(x, -s - 1.0); };
  auto d3 = [&](double x) { return -s * (s + 1.0) * (s + 2.0) * std::pow(x, -s - 3.0); };
  auto d5 = [&](double x) {
    return -s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * std::pow(x, -s - 5.0);
  };
  const double integral = std::abs(s - 1.0) < 1e-14
                              ? std::log(b / a)
                              : (std::pow(b, 1.0 - s) - std::pow(a, 1.0 - s)) / (1.0 - s);
  return integral + 0.5 * (f(a) - f(b)) + (d1(b) - d1(a)) / 12.0 - (d3(b) - d3(a)) / 720.0 +
         (d5(b) - d5(a)) / 30240.0;
}

struct Category {
  double lo = 0.0;  // smallest value
  double hi = 0.0;  // one past the largest value (== lo + 1 for exact values)
  double prob = 0.0;
  double mean = 0.0;
  double var = 0.0;
  bool overflow = false;
};

constexpr double kPopulationCap = 4611686018427387904.0;  // 2^62

std::vector<Category> gw_categories(const GWModel& gw) {
  std::vector<Category> cats;
  if (gw.kind == GWModel::Kind::finite) {
    for (std::size_t k = 0; k < gw.pmf.size(); ++k)
      if (gw.pmf[k] > 0.0) {
        const double v = static_cast<double>(k);
        cats.push_back({v, v + 1.0, gw.pmf[k], v, 0.0, false});
      }
    return cats;
  }
  constexpr int kExactMax = 31;
  for (int k = 1; k <= kExactMax; ++k)
    cats.push_back({double(k), double(k) + 1.0, gw.prob(k), double(k), 0.0, false});
  const double s = 1.0 + gw.alpha;
  for (int j = 5; j < 62; ++j) {
    const double a = std::ldexp(1.0, j), b = std::ldexp(1.0, j + 1);
    const double mass = power_sum(a, b, s);
    const double mean = power_sum(a, b, s - 1.0) / mass;
    const double second = power_sum(a, b, s - 2.0) / mass;
    cats.push_back({a, b, gw.c * mass, mean, std::max(0.0, second - mean * mean), false});
  }
  const double cap = kPopulationCap;
  const double tail = gw.c * (std::pow(cap, -gw.alpha) / gw.alpha + 0.5 * std::pow(cap, -s));
  cats.push_back({cap, kInf, tail, kInf, 0.0, true});
  return cats;
}

// Sum of n i.i.d. power-law values restricted to [a, b).
double bin_sum(const GWModel& gw, const Category& cat, std::int64_t n, Rng& rng) {
  if (cat.hi - cat.lo <= 1.0) return static_cast<double>(n) * cat.lo;
  if (n > 64) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double nn = static_cast<double>(n);
    const double v = std::round(nn * cat.mean + std::sqrt(nn * cat.var) * normal(rng));
    return std::clamp(v, nn * cat.lo, nn * (cat.hi - 1.0));
  }
  const double al = gw.alpha;
  auto ratio = [&](double k) {
    return std::pow(k, -1.0 - al) / ((std::pow(k, -al) - std::pow(k + 1.0, -al)) / al);
  };
  const double top = ratio(cat.lo);
  const double ua = std::pow(cat.lo, -al), ub = std::pow(cat.hi, -al);
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    for (;;) {
      const double x = std::pow(ua - uniform01(rng) * (ua - ub), -1.0 / al);
      const double k = std::min(std::floor(x), cat.hi - 1.0);
      if (uniform01(rng) * top <= ratio(k)) {
        sum += k;
        break;
      }
    }
  }
  return sum;
}

}  // namespace

GWEnsemble simulate_gw(const GWModel& gw, int generations, std::int64_t paths,
                       std::uint64_t seed, int threads) {
  GWEnsemble ens;
  ens.generations = generations;
  ens.m = gw.mean();
  if (!(ens.m > 1.0)) throw ModelError("offspring mean must exceed 1");
  const auto cats = gw_categories(gw);
  // Conditional probabilities from tail sums, accurate for the tiny far bins.
  std::vector<double> cond(cats.size(), 1.0);
  double suffix = 0.0;
  for (std::size_t k = cats.size(); k-- > 0;) {
    suffix += cats[k].prob;
    cond[k] = suffix > 0.0 ? std::min(1.0, cats[k].prob / suffix) : 1.0;
  }
  cond.back() = 1.0;
  const int width = generations + 1;
  ens.W.assign(static_cast<std::size_t>(paths) * width, 0.0);
  ens.flagged.assign(static_cast<std::size_t>(paths), 0);

  parallel_for(paths, threads, [&](std::int64_t p) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(p), Stream::offspring);
    double* w = &ens.W[static_cast<std::size_t>(p) * width];
    double z = 1.0;
    w[0] = 1.0;
    for (int n = 1; n <= generations; ++n) {
      double next = 0.0;
      if (z > 0.0 && !ens.flagged[p]) {
        auto remaining = static_cast<std::int64_t>(z);
        for (std::size_t c = 0; c < cats.size(); ++c) {
          if (remaining == 0) break;
          const auto& cat = cats[c];
          const double q = cond[c];
          std::int64_t count = remaining;
          if (q < 1.0) {
            std::binomial_distribution<std::int64_t> binom(remaining, q);
            count = binom(rng);
          }
          if (count == 0) continue;
          remaining -= count;
          if (cat.overflow) {
            ens.flagged[p] = 1;
            break;
          }
          next += bin_sum(gw, cat, count, rng);
        }
        if (next >= kPopulationCap) ens.flagged[p] = 1;
      } else {
        next = z;
      }
      if (ens.flagged[p]) {
        for (int k = n; k <= generations; ++k) w[k] = w[n - 1];
        break;
      }
      z = next;
      w[n] = z / std::pow(ens.m, n);
    }
  });
  return ens;
}

double estimate_Minfty(const PathRecord& path) { return path.M.empty() ? 0.0 : path.M.back(); }

}  // namespace supermart
