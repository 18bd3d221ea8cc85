#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "stackstab/core/dataset.hpp"

namespace stackstab {

/// CSV ingestion failure. `row` is the 1-based data row (0 for header/file
/// level problems); `column` names the offending column when there is one.
class CsvError : public std::runtime_error {
public:
    enum class Code {
        cannot_open,
        empty_file,
        missing_label_column,
        non_numeric_cell,
        ragged_row,
        too_many_labels,
        malformed_quotes,
    };

    CsvError(Code code, std::string message, std::size_t row = 0, std::string column = {});

    Code code() const noexcept { return code_; }
    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    Code code_;
    std::size_t row_;
    std::string column_;
};

/// Reads a comma-separated file with a mandatory header row. Every column other
/// than `label_column` must be numeric ('.' decimal separator). For binary tasks
/// the two distinct label values map to -1 / +1 in sorted order (numeric order
/// when both parse as numbers, lexicographic otherwise); multiclass labels map to
/// 0..K-1 the same way.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column, Task task);
Dataset parse_csv(std::istream& in, const std::string& label_column, Task task);

/// Writes features (named f1..fd unless the dataset carries names) followed by a
/// `label` column. Numbers use the shortest round-trip representation.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::filesystem::path& path, const Dataset& data);

std::string format_double(double value);

}  // namespace stackstab
