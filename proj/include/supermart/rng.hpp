#pragma once

#include <cstdint>
#include <random>

namespace supermart {

using Rng = std::mt19937_64;

// Independent random streams per path. Separate streams keep common random
// numbers aligned when a run differs only in one source of randomness.
enum class Stream : std::uint64_t {
  diffusion = 1,
  jumps = 2,
  spine_motion = 3,
  continuum_immigration = 4,
  coarse_immigration = 5,
  fine_immigration = 6,
  offspring = 7,
  bootstrap = 8,
  exact_transition = 9,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stream for (master_seed, path_id, stream); a pure function of its arguments,
/// so results never depend on scheduling.
Rng make_stream(std::uint64_t master_seed, std::uint64_t path_id, Stream stream);

/// Uniform on the open interval (0, 1), using 53 random bits.
double uniform01(Rng& rng);

/// Poisson variate. Means below 30 use inverse transform from a single
/// uniform, which couples counts monotonically across nearby means.
std::int64_t poisson(Rng& rng, double mean);

}  // namespace supermart
