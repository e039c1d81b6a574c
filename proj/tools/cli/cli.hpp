#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ddsd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Runs one `ddsd` invocation. args excludes the program name. Results go to
// out, the one-line "error: <category>: <message>" diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ddsd::cli
