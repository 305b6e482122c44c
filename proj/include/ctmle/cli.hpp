#pragma once

#include <iosfwd>

namespace ctmle {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_estimation_failure = 1, exit_usage = 2 };

/// Entry point of the `ctmle` tool with subcommands `estimate` and `simulate`.
/// Output goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctmle
