// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace esddpm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;

/// Runs one CLI invocation. CSV goes to `out`, log lines to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace esddpm::cli
