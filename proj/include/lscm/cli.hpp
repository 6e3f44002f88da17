#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lscm {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitDataError = 1, kExitNumericalError = 2 };

/**
 * @brief Entry point of the `lscm` tool. `args` excludes the program name.
 *
 * Subcommands: simulate, estimate, test, level-study, consistency-study,
 * intervention-check. The one-line summary goes to `out`, diagnostics to `err`.
 */
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lscm
