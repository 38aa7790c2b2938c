#pragma once

namespace whirlpool {

inline constexpr int kExitCompleted = 0;
inline constexpr int kExitBlowUp = 2;
inline constexpr int kExitConfigError = 3;
inline constexpr int kExitNumericalFailure = 4;

/// Subcommands: run, sweep, classify, gn-estimate, rescale.
int cli_main(int argc, char** argv);

}  // namespace whirlpool
