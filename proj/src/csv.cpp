// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/csv.hpp"

#include <charconv>
#include <fstream>

#include "esddpm/errors.hpp"

namespace esddpm {

std::string csv_quote(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') {
            out += '"';
        }
        out += ch;
    }
    out += '"';
    return out;
}

std::string format_real(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::vector<std::string> csv_split(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            out_ << ',';
        }
        out_ << csv_quote(fields[i]);
    }
    out_ << '\n';
}

void write_samples_csv(std::ostream& out, const SampleSet& samples, const Labels& labels) {
    ESDDPM_CHECK(labels.empty() || labels.size() == static_cast<std::size_t>(samples.cols()), DimensionMismatch,
                 "one label per sample required");
    CsvWriter csv(out);
    std::vector<std::string> header;
    for (Eigen::Index r = 0; r < samples.rows(); ++r) {
        header.push_back("x" + std::to_string(r));
    }
    if (!labels.empty()) {
        header.emplace_back("label");
    }
    csv.row(header);
    for (Eigen::Index c = 0; c < samples.cols(); ++c) {
        std::vector<std::string> fields;
        for (Eigen::Index r = 0; r < samples.rows(); ++r) {
            fields.push_back(format_real(samples(r, c)));
        }
        if (!labels.empty()) {
            fields.push_back(std::to_string(labels[static_cast<std::size_t>(c)]));
        }
        csv.row(fields);
    }
}

void write_samples_csv(const std::string& path, const SampleSet& samples, const Labels& labels) {
    std::ofstream out(path, std::ios::binary);
    ESDDPM_CHECK(out.good(), Error, "cannot open '" + path + "' for writing");
    write_samples_csv(out, samples, labels);
    ESDDPM_CHECK(out.good(), Error, "failed writing '" + path + "'");
}

Dataset read_samples_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    ESDDPM_CHECK(in.good(), Error, "cannot open '" + path + "'");
    std::string line;
    ESDDPM_CHECK(static_cast<bool>(std::getline(in, line)), Error, "'" + path + "' has no header");
    const auto header = csv_split(line);
    const bool labeled = !header.empty() && header.back() == "label";
    const std::size_t dim = header.size() - (labeled ? 1 : 0);
    ESDDPM_CHECK(dim >= 1, Error, "'" + path + "' has no coordinate columns");
    std::vector<double> values;
    Dataset out;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto fields = csv_split(line);
        ESDDPM_CHECK(fields.size() == header.size(), Error,
                     "'" + path + "' row " + std::to_string(rows + 1) + " has the wrong field count");
        for (std::size_t i = 0; i < dim; ++i) {
            double v = 0.0;
            const auto& f = fields[i];
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            ESDDPM_CHECK(res.ec == std::errc() && res.ptr == f.data() + f.size(), Error,
                         "'" + path + "' has a malformed number '" + f + "'");
            values.push_back(v);
        }
        if (labeled) {
            out.labels.push_back(std::stoi(fields.back()));
        }
        ++rows;
    }
    out.data = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows));
    return out;
}

}  // namespace esddpm
