#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace maskmatch::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitPrerequisite = 3;
inline constexpr int kExitInvariant = 4;

// Runs the command line `args` (without the program name), writing progress
// to `out` and diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace maskmatch::cli
