#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "supermart/io.hpp"

namespace supermart {

enum ExitCode : int {
  kExitOk = 0,
  kExitSchema = 1,
  kExitModel = 2,
  kExitNumerical = 3,
};

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::int64_t> paths;
  std::optional<double> dt;
  std::optional<double> horizon;
  int threads = 1;
  std::string base_dir = ".";  // resolves a relative "model_path"
};

/// Runs a scenario and writes its artifacts. Errors are reported on `log`
/// and mapped to the exit codes above.
int run_scenario(const json& config, const RunOverrides& overrides, std::ostream& log);

struct VerifyResult {
  bool pass = false;
  json report;
};

/// Suites: eigen, transform, martingale, identities, spine.
VerifyResult verify_suite(const std::string& suite, int threads = 1);

}  // namespace supermart
