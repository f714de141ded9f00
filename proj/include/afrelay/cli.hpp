#pragma once
#include <ostream>

namespace afrelay::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 1;
inline constexpr int exit_solver = 2;
inline constexpr int exit_validation = 3;

// Subcommands: sweep, outage, converge, validate, calibrate.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace afrelay::cli
