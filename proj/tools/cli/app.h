#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace radpose::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kIo = 3,
    kInvariant = 4,
};

/// Parses `args` (without the program name) and runs the chosen subcommand.
/// Errors go to `err` as a one-line JSON object; the return value is the
/// process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace radpose::cli
