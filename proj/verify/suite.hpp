// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esddpm/elbo.hpp"

namespace esddpm::verify {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SuiteReport {
    std::vector<CheckResult> checks;
    std::vector<ElboReport> elbo;  // one per randomized instance, then the exact-posterior one

    int failures() const;
};

/// Fast invariant suite: gradients, forward process, posterior, ELBO bound,
/// reconstruction weight, T'=0 degeneracy, metric references and checkpoint
/// round trip.
SuiteReport run_invariant_suite(std::uint64_t seed);

}  // namespace esddpm::verify
