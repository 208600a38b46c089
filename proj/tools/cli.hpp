#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fat::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kDiverged = 3 };

/// Runs the `fat` command line with argv-style arguments (args[0] is the
/// program name). Diagnostics go to `err`, reports to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fat::cli
