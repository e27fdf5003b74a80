#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace abm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDegenerate = 4;

/// Runs the command line; report records go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace abm::cli
