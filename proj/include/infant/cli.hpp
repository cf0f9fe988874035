#pragma once

#include <iosfwd>

namespace infant::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Parses and dispatches one `infant-sim` invocation.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace infant::cli
