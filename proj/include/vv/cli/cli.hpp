#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one `vvseg` invocation. `args` excludes the program name. Results go
/// to `out`; logs, warnings and diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vv::cli
