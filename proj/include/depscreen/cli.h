// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_CLI_H_
#define DEPSCREEN_CLI_H_

#include <iosfwd>
#include <span>
#include <string>

namespace depscreen {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitInternalError = 2;

// Runs one `depscreen` invocation; `args` excludes the program name.
// Failures print a single JSON line {"error":{"kind","message"}} to `err`.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace depscreen

#endif  // DEPSCREEN_CLI_H_
