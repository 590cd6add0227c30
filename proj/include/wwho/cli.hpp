#pragma once

#include <iosfwd>

namespace wwho {

/// Runs the command-line tool. Returns 0 on success, 1 on a validation error
/// (bad flags, missing or invalid schema, malformed input files) and 2 on any
/// other runtime failure.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

} // namespace wwho
