#pragma once

#include <iosfwd>

namespace ric {

/// Runs the command-line driver. Returns the process exit code:
/// 0 all compliant, 1 issues found, 2 usage or internal error,
/// 3 some chunks out of scope but no issues.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ric
