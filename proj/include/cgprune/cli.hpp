#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cgprune {

// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitFormat = 3,
    kExitNumeric = 4,
};

// Runs one invocation; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cgprune
