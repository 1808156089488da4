#pragma once

#include <iosfwd>

namespace ewa::cli {

/// Full command-line driver: parses argv, runs the requested subcommand,
/// writes results to `out` and diagnostics to `err`, returns the process
/// exit status. 0 means every output was written and all preconditions held.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ewa::cli
