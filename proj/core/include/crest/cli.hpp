#pragma once

namespace crest::cli {

// Process exit codes. Every failure is reported as a single line on stderr:
//   error: <category>: <message>
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;    // bad flags, task/variant mismatch
inline constexpr int kDataError = 2;     // missing/invalid files, bad corpus
inline constexpr int kNumericError = 3;  // non-finite loss or gradients

// Entry point behind the `crest` binary. Subcommands: synth, segment, split,
// train, eval, predict, stats. CREST_<KEY> environment variables override
// training-config keys.
int run(int argc, const char* const* argv);

}  // namespace crest::cli
