#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "supermart/model.hpp"
#include "supermart/spectral.hpp"

namespace supermart {

struct SimConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  double epsilon = 0.0;  // large-jump threshold; <= 0 selects default_epsilon
  std::int64_t paths = 1000;
  std::uint64_t master_seed = 0;
  int record_stride = 1;
  Eigen::VectorXd x0;  // empty: nu, so that <phi, x0> = 1
  bool log_jumps = false;
  int threads = 1;
  /// Below this multiple of the per-step variance the exact Feller
  /// transition replaces the Gaussian increment.
  double exact_mass_factor = 64.0;
};

struct SpineConfig : SimConfig {
  double delta = 1e-3;    // mass quantum for continuum immigration
  double delta_m = 1e-2;  // discrete immigrants of size <= delta_m are dropped
};

struct JumpEvent {
  double t = 0.0;
  int type = 0;  // 0-based
  double size = 0.0;
};

struct PathRecord {
  std::int64_t path_id = 0;
  int d = 1;
  std::vector<double> times;
  std::vector<double> masses;  // row-major, times.size() x d
  std::vector<double> M;       // e^{-lambda t} <phi, X_t>
  std::vector<JumpEvent> jumps;
  double clipped = 0.0;  // total negative mass removed
  bool flagged = false;
  std::vector<double> spine_occupation;  // time spent by the spine per type

  double mass(std::size_t k, int i) const { return masses[k * d + i]; }
};

/// Threshold so that the expected number of large jumps per step from unit
/// mass is at most 0.1 for every type.
double default_epsilon(const Model& model, double dt, double mass);

/// One step kernel shared by the plain and spine simulators.
class CsbpStepper {
 public:
  CsbpStepper(const Model& model, const Eigentriple& eig, double dt, double epsilon,
              double exact_mass_factor);

  struct Streams {
    Rng diffusion;
    Rng exact;
    Rng jumps;
    std::normal_distribution<double> normal;
  };

  /// Advances x by one step of length dt ending at time t_end. Large jumps
  /// are applied and, if `jumps` is non-null, logged at t_end. Exactly one
  /// normal variate per type is drawn from the diffusion stream.
  void step(Eigen::VectorXd& x, double t_end, Streams& streams, std::vector<JumpEvent>* jumps,
            double& clipped) const;

  double epsilon() const { return epsilon_; }
  const Eigen::MatrixXd& mean_step() const { return e_; }

  /// Expected large jumps per step above which a type switches to a higher
  /// threshold (epsilon times a power of 4).
  static constexpr double kMaxJumpsPerStep = 256.0;

 private:
  struct Level {
    double epsilon;
    Eigen::VectorXd v;          // alpha + int_0^eps r^2 pi
    Eigen::VectorXd self;       // e_(i,i) - dt int_eps^inf r pi
    Eigen::VectorXd jump_rate;  // pi((eps, inf))
  };

  const Model* model_;
  double dt_;
  double epsilon_;
  double exact_factor_;
  Eigen::MatrixXd e_;  // exp(dt (Q^T + diag beta))
  std::vector<Level> levels_;
};

std::vector<PathRecord> simulate_csbp(const Model& model, const Eigentriple& eig,
                                      const SimConfig& cfg);
PathRecord simulate_csbp_path(const Model& model, const Eigentriple& eig, const SimConfig& cfg,
                              const CsbpStepper& stepper, std::int64_t path_id);

/// Spine motion: q~_ij = q_ij phi_j / phi_i off the diagonal, rows summing to 0.
RateMatrix tilted_generator(const Model& model, const Eigentriple& eig);

struct SpineDiagnostics {
  double truncated_first_moment = 0.0;  // max_i int_0^{delta_m} y pi_i(dy)
  double total_first_moment = 0.0;      // matching int_0^inf y pi_i(dy) (may be inf)
  bool budget_exceeded = false;
  std::string warning;
};

SpineDiagnostics spine_diagnostics(const Model& model, const SpineConfig& cfg);

/// Paths of X under the size-biased measure, built from the spine, its
/// immigration and an independent copy started from x0.
std::vector<PathRecord> simulate_spine(const Model& model, const Eigentriple& eig,
                                       const SpineConfig& cfg);

struct GWEnsemble {
  int generations = 0;
  double m = 0.0;
  std::vector<double> W;  // paths x (generations + 1), row-major
  std::vector<char> flagged;

  std::size_t paths() const { return flagged.size(); }
  double w(std::size_t path, int n) const { return W[path * (generations + 1) + n]; }
};

GWEnsemble simulate_gw(const GWModel& gw, int generations, std::int64_t paths,
                       std::uint64_t seed, int threads = 1);

/// M at the last recorded time.
double estimate_Minfty(const PathRecord& path);

}  // namespace supermart
