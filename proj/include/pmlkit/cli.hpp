#pragma once

// Command-line front end: JSON config in, JSON report (and CSVs) out.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pmlkit/errors.hpp"

namespace pmlkit::cli {

inline constexpr const char* kVersion = "0.1.0";
/// Environment variable overriding the built-in default seed.
inline constexpr const char* kSeedEnv = "PMLKIT_SEED";
inline constexpr std::uint64_t kDefaultSeed = 1;
/// Monte Carlo sample count when the sim section omits one.
inline constexpr long kDefaultSamples = 100000;
/// Delta used by `kalman` when the config has no budget.
inline constexpr double kDefaultKalmanDelta = 0.001;

enum ExitCode : int {
  kExitOk = 0,
  kExitSchema = 2,
  kExitNumerical = 3,
  kExitInfeasible = 4,
  kExitUnstable = 5,
};

int exit_code_for(ErrorKind kind);

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace pmlkit::cli
