#pragma once

#include <iosfwd>

namespace siprop::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kNumericalError = 4 };

/// Parses argv and runs one of analyze, simulate or pivot-check. Reports go to
/// `out` unless an output path is given; errors go to `err` as one JSON line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace siprop::cli
