#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace amplasso {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_numerical = 1, exit_usage = 2 };

/// Parses and runs one command. args excludes the program name. Results go
/// to out, usage and error messages to err, log lines to stderr.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace amplasso
