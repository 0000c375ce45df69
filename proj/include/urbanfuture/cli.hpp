#pragma once

#include <iosfwd>

namespace urbanfuture {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `urbanfuture` command. Machine output goes to `out`,
// diagnostics to `err`. Log verbosity comes from URBANFUTURE_LOG
// (quiet, error, warn, info, debug; default warn).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace urbanfuture
