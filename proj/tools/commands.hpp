#pragma once

#include <string>
#include <vector>

namespace geomint::cli {

/// Full command-line entry point: parses argv, runs one subcommand and maps
/// failures to exit codes (1 usage, 2 numerical/convergence/IO).
int run(int argc, const char* const* argv);

/// Convenience for in-process callers.
int run(const std::vector<std::string>& args);

} // namespace geomint::cli
