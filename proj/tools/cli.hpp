// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace hsf::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kNumericError = 3,
};

/// Runs one `hsf` invocation. `args` excludes the program name.
/// Summaries go to `out`; failures print one `error: ...` line to `err`.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace hsf::cli
