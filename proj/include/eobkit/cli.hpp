#pragma once

#include <ostream>

namespace eobkit {

/// Runs one `eobkit <subcommand> ...` invocation. Returns 0 on success,
/// 1 on a runtime failure, 2 on a usage error. Failures print a single
/// line `error: <Class>: <message>` to err.
int run_subcommand(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eobkit
