#pragma once

#include <iosfwd>

namespace expflow::cli {

enum ExitCode : int { ok = 0, integration_failure = 1, config_error = 2 };

/// `expflow solve|study|list ...`; output goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace expflow::cli
