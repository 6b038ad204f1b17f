// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "esddpm/datasets.hpp"
#include "esddpm/types.hpp"

namespace esddpm {

/// Quotes a field when it contains a comma, quote, CR or LF; inner quotes are doubled.
std::string csv_quote(std::string_view field);

/// Shortest text that parses back to the same double.
std::string format_real(double value);

/// Splits one CSV record, honoring quoted fields.
std::vector<std::string> csv_split(std::string_view line);

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

/// Header x0..x{d-1}[,label], one row per sample.
void write_samples_csv(std::ostream& out, const SampleSet& samples, const Labels& labels = {});
void write_samples_csv(const std::string& path, const SampleSet& samples, const Labels& labels = {});

/// Reads a file written by write_samples_csv.
Dataset read_samples_csv(const std::string& path);

}  // namespace esddpm
