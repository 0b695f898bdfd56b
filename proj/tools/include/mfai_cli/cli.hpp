#pragma once

#include <iosfwd>

namespace mfai::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kArgumentError = 2;

/// Entry point of the `mfai` tool. Results go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfai::cli
