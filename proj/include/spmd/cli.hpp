#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spmd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Runs one command line (args excludes the program name). Data goes to out,
// diagnostics to err. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace spmd::cli
