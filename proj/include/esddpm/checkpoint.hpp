// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "esddpm/basegen.hpp"
#include "esddpm/diffusion.hpp"
#include "esddpm/nn.hpp"
#include "esddpm/schedule.hpp"

namespace esddpm {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct OptimizerCheckpoint {
    AdamState adam;
    std::uint64_t iteration = 0;
};

/// Any subset of sections. A model implies the schedule section (the model's
/// own schedule is written; `schedule` must be empty or equal to it).
struct CheckpointBundle {
    std::optional<NoiseSchedule> schedule;
    std::optional<DiffusionModel> model;
    std::optional<BaseGenerator> generator;
    std::optional<OptimizerCheckpoint> optimizer;
};

/// Layout: "ESDD", u16 version, u16 section count, then a table of
/// (4-byte tag, u64 length) followed by the payloads. Tags: SCHD, MODL,
/// GENR, OPTS. All integers and doubles little-endian.
std::string encode_checkpoint(const CheckpointBundle& bundle);
/// Throws CorruptCheckpoint naming the failing section.
CheckpointBundle decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const CheckpointBundle& bundle);
CheckpointBundle load_checkpoint(const std::string& path);

}  // namespace esddpm
