#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rom/error.hpp"

namespace rom::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;     // bad flags, config or arguments
inline constexpr int kExitNumeric = 3;   // divergence, degenerate data
inline constexpr int kExitIo = 4;        // missing, unreadable or corrupt files
inline constexpr int kExitMismatch = 5;  // incompatible artifacts

int exit_code_for(ErrorKind kind);

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version();

}  // namespace rom::cli
