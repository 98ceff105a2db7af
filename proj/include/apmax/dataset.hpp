// Subject records, dataset containers and file ingestion.
//
// A record is one visit: 14 optional indicator values (missing = the
// examination was not part of that visit's diagnostic strategy) plus an
// optional category label. Datasets are immutable after construction and
// safe to read from multiple threads.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "apmax/indicators.hpp"

namespace apmax {

struct SubjectRecord {
    std::string subject_id;
    std::string visit_id;
    std::array<std::optional<double>, kIndicatorCount> values;
    std::optional<Category> label;  // nullopt = unlabeled

    bool operator==(const SubjectRecord&) const = default;
};

enum class SplitTag { None, Train, Validation, Test };

struct Dataset {
    std::vector<SubjectRecord> records;
    SplitTag split = SplitTag::None;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

// Throws std::invalid_argument on duplicate (subject_id, visit_id) pairs
// or non-finite present values.
void validate_dataset(const Dataset& ds);

// Plain comma split; the format forbids the delimiter inside fields, so
// there is no quoting.
std::vector<std::string> split_csv_line(const std::string& line);

// Strict finite double; errors carry the 1-based line number.
double parse_csv_double(const std::string& field, std::size_t line_no);

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

enum class FileFormat { Csv, JsonLines };

// Picks Csv for .csv, JsonLines for .jsonl/.ndjson/.json.
FileFormat format_from_extension(const std::filesystem::path& path);

// Errors carry the 1-based line number of the offending row.
Dataset parse_dataset(const std::filesystem::path& path, FileFormat format);

void write_dataset(const Dataset& ds, const std::filesystem::path& path,
                   FileFormat format);

struct SplitFractions {
    double train = 0.8;
    double validation = 0.05;
    double test = 0.15;
};

struct SplitResult {
    Dataset train;
    Dataset validation;
    Dataset test;
};

// Subject-level split: all visits of a subject land in one split, and every
// subject with an Unknown-labeled visit goes to test regardless of the
// fractions (which apply to the remaining subjects). Deterministic in seed.
SplitResult split_dataset(const Dataset& ds, const SplitFractions& fractions,
                          std::uint64_t seed);

}  // namespace apmax
