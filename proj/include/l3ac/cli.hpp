#pragma once

// The `l3ac` command-line tool, callable in-process for tests.

#include <iosfwd>
#include <string>
#include <vector>

namespace l3ac::cli {

enum ExitCode : int {
  kOk = 0,
  /// Bad usage, unreadable input, unknown config name.
  kUsage = 1,
  /// WAV not mono, wrong sample rate, unsupported encoding.
  kAudioFormat = 2,
  /// Container produced by a different codec configuration.
  kConfigMismatch = 3,
  /// Corrupt or truncated container / model file.
  kCorrupt = 4,
  /// A verify invariant or gradient check failed.
  kInvariant = 5,
  /// Non-finite values during training or inference.
  kNumerical = 6,
};

/// Runs one invocation. `args` excludes the program name. Results go to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace l3ac::cli
