#pragma once

#include <iosfwd>

namespace plaque {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitSolver = 2;

// The plaquesim command line. Returns 0 on success, 1 on configuration or I/O
// errors and 2 when a solver fails or produces non-finite numbers.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace plaque
