#pragma once

#include <iosfwd>

namespace malforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitConfig = 65;

/// Entry point behind the `malforge` executable. Subcommands: synth, convert,
/// train-acgan, sample-fakes, eval-cnn, eval-elm, experiment, report.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace malforge
