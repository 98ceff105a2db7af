#include "apmax/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

#include "apmax/rng.hpp"

namespace apmax {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

double parse_csv_double(const std::string& field, std::size_t line_no) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": malformed numeric value '" + field + "'");
    }
    if (!std::isfinite(v)) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": non-finite numeric value '" + field + "'");
    }
    return v;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

namespace {

using nlohmann::json;

constexpr std::string_view kCsvComment = "# openapmax dataset v1";

std::string csv_header() {
    std::string h = "subject_id,visit_id,label";
    for (auto name : indicator_names()) {
        h += ',';
        h += name;
    }
    return h;
}

[[noreturn]] void row_error(std::size_t line_no, const std::string& what) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": " + what);
}

void check_writable_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") != std::string::npos) {
        throw std::invalid_argument("field contains CSV delimiter characters: '" +
                                    s + "'");
    }
}

Dataset parse_csv(std::istream& in) {
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;

    // Skip comment lines before the header.
    std::string header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] == '#') continue;
        header = line;
        break;
    }
    if (header.empty()) {
        throw std::runtime_error("missing CSV header");
    }

    auto cols = split_csv_line(header);
    if (cols.size() != 3 + kIndicatorCount || cols[0] != "subject_id" ||
        cols[1] != "visit_id" || cols[2] != "label") {
        throw std::runtime_error("CSV header must be '" + csv_header() + "'");
    }
    for (int i = 0; i < kIndicatorCount; ++i) {
        if (cols[3 + i] != indicator_names()[i]) {
            throw std::runtime_error("unknown indicator column '" + cols[3 + i] +
                                     "' (expected '" +
                                     std::string(indicator_names()[i]) + "')");
        }
    }

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 3 + kIndicatorCount) {
            row_error(line_no, "expected " + std::to_string(3 + kIndicatorCount) +
                                   " fields, got " + std::to_string(fields.size()));
        }
        SubjectRecord rec;
        rec.subject_id = fields[0];
        rec.visit_id = fields[1];
        if (rec.subject_id.empty()) row_error(line_no, "empty subject_id");
        if (rec.visit_id.empty()) row_error(line_no, "empty visit_id");
        if (!fields[2].empty()) {
            auto cat = category_from_string(fields[2]);
            if (!cat) row_error(line_no, "unknown label '" + fields[2] + "'");
            rec.label = *cat;
        }
        for (int i = 0; i < kIndicatorCount; ++i) {
            const std::string& cell = fields[3 + i];
            if (!cell.empty()) rec.values[i] = parse_csv_double(cell, line_no);
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

Dataset parse_jsonl(std::istream& in) {
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            row_error(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) row_error(line_no, "record is not a JSON object");

        SubjectRecord rec;
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            const std::string& key = it.key();
            if (key == "subject_id") {
                rec.subject_id = it.value().get<std::string>();
            } else if (key == "visit_id") {
                rec.visit_id = it.value().get<std::string>();
            } else if (key == "label") {
                auto cat = category_from_string(it.value().get<std::string>());
                if (!cat) {
                    row_error(line_no,
                              "unknown label '" + it.value().get<std::string>() + "'");
                }
                rec.label = *cat;
            } else {
                auto idx = indicator_index(key);
                if (!idx) row_error(line_no, "unknown indicator key '" + key + "'");
                if (!it.value().is_number()) {
                    row_error(line_no, "indicator '" + key + "' is not numeric");
                }
                double v = it.value().get<double>();
                if (!std::isfinite(v)) {
                    row_error(line_no, "non-finite value for '" + key + "'");
                }
                rec.values[*idx] = v;
            }
        }
        if (rec.subject_id.empty()) row_error(line_no, "missing subject_id");
        if (rec.visit_id.empty()) row_error(line_no, "missing visit_id");
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace

void validate_dataset(const Dataset& ds) {
    std::set<std::pair<std::string_view, std::string_view>> seen;
    for (const auto& rec : ds.records) {
        auto [it, inserted] =
            seen.emplace(rec.subject_id, rec.visit_id);
        (void)it;
        if (!inserted) {
            throw std::invalid_argument("duplicate visit (" + rec.subject_id + ", " +
                                        rec.visit_id + ")");
        }
        for (const auto& v : rec.values) {
            if (v && !std::isfinite(*v)) {
                throw std::invalid_argument("non-finite value in record (" +
                                            rec.subject_id + ", " + rec.visit_id +
                                            ")");
            }
        }
    }
}

FileFormat format_from_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    if (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") {
        return FileFormat::JsonLines;
    }
    return FileFormat::Csv;
}

Dataset parse_dataset(const std::filesystem::path& path, FileFormat format) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    Dataset ds = format == FileFormat::Csv ? parse_csv(in) : parse_jsonl(in);
    validate_dataset(ds);
    return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path,
                   FileFormat format) {
    validate_dataset(ds);
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    if (format == FileFormat::Csv) {
        out << kCsvComment << '\n' << csv_header() << '\n';
        for (const auto& rec : ds.records) {
            check_writable_field(rec.subject_id);
            check_writable_field(rec.visit_id);
            out << rec.subject_id << ',' << rec.visit_id << ',';
            if (rec.label) out << to_string(*rec.label);
            for (const auto& v : rec.values) {
                out << ',';
                if (v) out << format_double(*v);
            }
            out << '\n';
        }
    } else {
        out << "# openapmax jsonl v1\n";
        for (const auto& rec : ds.records) {
            json obj;
            obj["subject_id"] = rec.subject_id;
            obj["visit_id"] = rec.visit_id;
            if (rec.label) obj["label"] = to_string(*rec.label);
            for (int i = 0; i < kIndicatorCount; ++i) {
                if (rec.values[i]) {
                    obj[std::string(indicator_names()[i])] = *rec.values[i];
                }
            }
            out << obj.dump() << '\n';
        }
    }
    if (!out) {
        throw std::runtime_error("I/O error writing '" + path.string() + "'");
    }
}

SplitResult split_dataset(const Dataset& ds, const SplitFractions& fractions,
                          std::uint64_t seed) {
    if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0) {
        throw std::invalid_argument("split fractions must be nonnegative");
    }
    double total = fractions.train + fractions.validation + fractions.test;
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must sum to 1");
    }

    // Subject pools: any subject with an Unknown-labeled visit is test-only;
    // the fractions divide the rest.
    std::map<std::string, bool> has_unknown;   // subject -> saw Unknown label
    std::map<std::string, bool> has_known;     // subject -> saw AD/CN label
    for (const auto& rec : ds.records) {
        auto& unk = has_unknown[rec.subject_id];
        auto& kn = has_known[rec.subject_id];
        if (rec.label == Category::Unknown) unk = true;
        if (rec.label == Category::AD || rec.label == Category::CN) kn = true;
    }

    std::vector<std::string> pool;  // subjects to divide by fraction
    std::size_t known_subjects = 0;
    for (const auto& [subject, unk] : has_unknown) {
        if (!unk) pool.push_back(subject);
        if (!unk && has_known[subject]) ++known_subjects;
    }
    if (known_subjects < 2) {
        throw std::invalid_argument(
            "need at least 2 known-category subjects to split");
    }

    // pool is sorted (map order); shuffle it with the seed for stability.
    Rng rng(derive_seed(seed, 0));
    rng.shuffle(pool);

    // Largest-remainder apportionment so counts are exact for exact fractions.
    const std::size_t n = pool.size();
    std::array<double, 3> ideal = {fractions.train * n, fractions.validation * n,
                                   fractions.test * n};
    std::array<std::size_t, 3> count;
    for (int i = 0; i < 3; ++i) count[i] = static_cast<std::size_t>(ideal[i]);
    std::size_t assigned = count[0] + count[1] + count[2];
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return ideal[a] - std::floor(ideal[a]) > ideal[b] - std::floor(ideal[b]);
    });
    for (int i = 0; assigned < n; ++i) {
        ++count[order[i % 3]];
        ++assigned;
    }

    std::map<std::string, SplitTag> assignment;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < count[0]; ++i) assignment[pool[pos++]] = SplitTag::Train;
    for (std::size_t i = 0; i < count[1]; ++i) assignment[pool[pos++]] = SplitTag::Validation;
    for (std::size_t i = 0; i < count[2]; ++i) assignment[pool[pos++]] = SplitTag::Test;

    SplitResult result;
    result.train.split = SplitTag::Train;
    result.validation.split = SplitTag::Validation;
    result.test.split = SplitTag::Test;
    for (const auto& rec : ds.records) {
        if (has_unknown[rec.subject_id]) {
            result.test.records.push_back(rec);
            continue;
        }
        switch (assignment[rec.subject_id]) {
            case SplitTag::Train: result.train.records.push_back(rec); break;
            case SplitTag::Validation: result.validation.records.push_back(rec); break;
            default: result.test.records.push_back(rec); break;
        }
    }
    return result;
}

}  // namespace apmax
