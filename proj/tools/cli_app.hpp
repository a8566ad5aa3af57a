#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace condforge::cli {

enum ExitCode { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Runs the command line (args excludes the program name). JSON results go
/// to `out`; logs, warnings and the effective configuration go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace condforge::cli
