#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "specgan/gradcheck.hpp"

namespace specgan {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // gradcheck mismatch, missing checkpoint, I/O
  kExitConfig = 2,   // bad flags or config file
  kExitNumeric = 3,  // training hit a NaN or infinity
};

/// Runs `specgan <subcommand> ...`; args[0] is the program name.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

/// The gradcheck subcommand with extra cases appended to the standard suite
/// (tests use this to inject a broken backward rule).
int cmd_gradcheck(std::uint64_t seed, const GradCheckOptions& options, const std::vector<GradCheckCase>& extra,
                  std::ostream& out, std::ostream& err);

}  // namespace specgan
