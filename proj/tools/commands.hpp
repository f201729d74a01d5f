#pragma once

#include <string>
#include <vector>

namespace pmmtalk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRuntime = 4;

/// Parses `args` (args[0] is the program name), runs the subcommand and maps
/// errors to exit codes. Never throws.
int run(const std::vector<std::string>& args);

}  // namespace pmmtalk::cli
