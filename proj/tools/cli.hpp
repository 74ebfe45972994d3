#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace koopcheck::cli {

// Exit codes: 0 success, 1 theorem violation, 2 config error, 3 runtime error.
enum ExitCode : int { kOk = 0, kViolation = 1, kConfigError = 2, kRuntimeError = 3 };

// Runs one command line (args[0] is the program name). Human output and the
// --json summary go to `out`; error JSON goes to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace koopcheck::cli
