#include "stackstab/core/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

namespace stackstab {

CsvError::CsvError(Code code, std::string message, std::size_t row, std::string column)
    : std::runtime_error(std::move(message)), code_(code), row_(row), column_(std::move(column)) {}

namespace {

using Record = std::vector<std::string>;

// RFC 4180 style: fields separated by ',', optionally double-quoted, with ""
// as an escaped quote inside quoted fields. Blank lines are skipped.
std::vector<Record> read_records(std::istream& in) {
    std::vector<Record> records;
    Record current;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool line_has_content = false;
    std::size_t line = 1;

    auto end_field = [&] {
        current.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_record = [&] {
        if (line_has_content) {
            end_field();
            records.push_back(std::move(current));
        }
        current.clear();
        field.clear();
        line_has_content = false;
        field_was_quoted = false;
    };

    char c = 0;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted) {
                    throw CsvError(CsvError::Code::malformed_quotes,
                                   "unexpected quote on line " + std::to_string(line), line);
                }
                in_quotes = true;
                field_was_quoted = true;
                line_has_content = true;
                break;
            case ',':
                line_has_content = true;
                end_field();
                break;
            case '\r':
                break;
            case '\n':
                end_record();
                ++line;
                break;
            default:
                line_has_content = true;
                field.push_back(c);
        }
    }
    if (in_quotes) {
        throw CsvError(CsvError::Code::malformed_quotes, "unterminated quoted field", line);
    }
    end_record();
    return records;
}

std::optional<double> parse_number(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

// Distinct label strings in sorted order: numeric when every value parses.
std::vector<std::string> sorted_distinct(const std::vector<std::string>& raw) {
    std::vector<std::string> distinct = raw;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const bool numeric = std::all_of(distinct.begin(), distinct.end(),
                                     [](const std::string& s) { return parse_number(s).has_value(); });
    if (numeric) {
        std::stable_sort(distinct.begin(), distinct.end(), [](const std::string& a, const std::string& b) {
            return *parse_number(a) < *parse_number(b);
        });
    }
    return distinct;
}

}  // namespace

Dataset parse_csv(std::istream& in, const std::string& label_column, Task task) {
    std::vector<Record> records = read_records(in);
    if (records.empty()) throw CsvError(CsvError::Code::empty_file, "empty file: no header row");
    const Record& header = records.front();
    if (records.size() == 1) throw CsvError(CsvError::Code::empty_file, "empty file: header but no data rows");

    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end()) {
        throw CsvError(CsvError::Code::missing_label_column,
                       "label column not found: '" + label_column + "'", 0, label_column);
    }
    const auto label_index = static_cast<std::size_t>(label_it - header.begin());
    if (header.size() < 2) {
        throw CsvError(CsvError::Code::empty_file, "file has no feature columns");
    }

    std::vector<Example> examples;
    std::vector<std::string> raw_labels;
    examples.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const Record& rec = records[r];
        if (rec.size() != header.size()) {
            throw CsvError(CsvError::Code::ragged_row,
                           "row " + std::to_string(r) + " has " + std::to_string(rec.size()) +
                               " fields, header has " + std::to_string(header.size()),
                           r);
        }
        Example e;
        e.x.reserve(header.size() - 1);
        for (std::size_t c = 0; c < rec.size(); ++c) {
            if (c == label_index) continue;
            auto value = parse_number(rec[c]);
            if (!value) {
                throw CsvError(CsvError::Code::non_numeric_cell,
                               "non-numeric cell at row " + std::to_string(r) + ", column '" + header[c] +
                                   "': '" + rec[c] + "'",
                               r, header[c]);
            }
            e.x.push_back(*value);
        }
        if (task == Task::regression) {
            auto y = parse_number(rec[label_index]);
            if (!y) {
                throw CsvError(CsvError::Code::non_numeric_cell,
                               "non-numeric regression label at row " + std::to_string(r) + ", column '" +
                                   label_column + "'",
                               r, label_column);
            }
            e.y = *y;
        }
        raw_labels.push_back(rec[label_index]);
        examples.push_back(std::move(e));
    }

    std::vector<std::string> feature_names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != label_index) feature_names.push_back(header[c]);
    }

    if (task == Task::regression) {
        Dataset data(task, std::move(examples));
        data.set_feature_names(std::move(feature_names));
        return data;
    }

    std::vector<std::string> distinct = sorted_distinct(raw_labels);
    if (task == Task::binary && distinct.size() > 2) {
        throw CsvError(CsvError::Code::too_many_labels,
                       "binary task but label column '" + label_column + "' has " +
                           std::to_string(distinct.size()) + " distinct values",
                       0, label_column);
    }
    std::map<std::string, double> code;
    std::vector<double> label_set;
    std::vector<std::string> names;
    if (task == Task::binary) {
        // A single observed value maps to -1; the declared set is always {-1, +1}.
        code[distinct[0]] = -1.0;
        if (distinct.size() == 2) code[distinct[1]] = 1.0;
        label_set = {-1.0, 1.0};
        names = distinct;
        if (names.size() == 1) names.push_back("");
    } else {
        for (std::size_t k = 0; k < distinct.size(); ++k) {
            code[distinct[k]] = static_cast<double>(k);
            label_set.push_back(static_cast<double>(k));
        }
        names = distinct;
    }
    for (std::size_t i = 0; i < examples.size(); ++i) examples[i].y = code.at(raw_labels[i]);

    Dataset data(task, std::move(examples), std::move(label_set));
    data.set_label_names(std::move(names));
    data.set_feature_names(std::move(feature_names));
    return data;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column, Task task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CsvError(CsvError::Code::cannot_open, "cannot open '" + path.string() + "'");
    return parse_csv(in, label_column, task);
}

std::string format_double(double value) {
    char buffer[64];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, ptr);
}

void write_csv(std::ostream& out, const Dataset& data) {
    const auto& names = data.feature_names();
    for (std::size_t j = 0; j < data.dim(); ++j) {
        out << (names.empty() ? "f" + std::to_string(j + 1) : names[j]) << ',';
    }
    out << "label\n";
    for (const auto& e : data.examples()) {
        for (double v : e.x) out << format_double(v) << ',';
        out << format_double(e.y) << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    write_csv(out, data);
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace stackstab
