#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nmassvs {

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3 };

/// Entry point for the command-line tool: subcommands analyze, structure and oracle.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace nmassvs
