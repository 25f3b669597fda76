#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace aled::cli {

/// Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

/// Runs one invocation. `args` excludes the program name. JSON goes to
/// `out` (or the --out file), human summaries and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aled::cli
