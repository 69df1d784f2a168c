#pragma once

#include <string>
#include <vector>

namespace hadlrr::cli {

/// Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical abort.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

int run(int argc, const char* const* argv);

/// Convenience overload; `args` excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace hadlrr::cli
