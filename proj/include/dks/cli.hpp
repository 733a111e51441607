#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dks::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line tool. `args` excludes the program name. Results go
/// to `out` (or the --out file), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Rounds to 9 significant digits, the precision of all printed numbers.
double sig9(double v);

}  // namespace dks::cli
