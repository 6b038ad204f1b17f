// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace esddpm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A set of samples stored one per column (rows = data dimension).
using SampleSet = Eigen::MatrixXd;

/// Optional class label; std::nullopt means unconditional.
using Label = std::optional<int>;

/// Per-sample labels for a batch; empty means unconditional.
using Labels = std::vector<int>;

/// Diffusion step index. 0 is clean data, T is the end of the chain.
using Step = int;

}  // namespace esddpm
