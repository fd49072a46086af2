#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace keyrate {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSolver = 3;

/// Runs one command. args excludes the program name. Results go to `out`,
/// diagnostics to `err`. Returns 0, 2 (bad input) or 3 (solver failure).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace keyrate
