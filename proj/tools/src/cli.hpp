// SPDX-License-Identifier: Apache-2.0
//
// The prefopt command line, callable in-process.
#pragma once

#include <ostream>
#include <span>
#include <string>

namespace prefopt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// `args` excludes the program name. Data goes to `out` (or files), help and
/// usage errors to `out` / `err`, logs to stderr.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace prefopt::cli
