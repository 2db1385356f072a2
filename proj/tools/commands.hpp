#pragma once

#include <iosfwd>

namespace lobnet::cli {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kRuntimeError = 4 };

/// Parses argv and runs one command. Records and results go to `out`,
/// key=value log lines and the final error line to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lobnet::cli
