#pragma once

#include <ostream>

namespace drcurve::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the drcurve command. Subcommands: estimate, simulate,
/// bandwidth, export. Returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace drcurve::cli
