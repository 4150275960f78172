#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hypersage::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitFailure = 2;

/// Parses `args` (without the program name) and runs the selected command.
/// Tables and reports go to `out`, diagnostics to `err`. Returns 0 on
/// success, 1 for invalid input (bad flags, missing or malformed data) and
/// 2 for runtime failures (divergence, a failed check).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hypersage::cli
