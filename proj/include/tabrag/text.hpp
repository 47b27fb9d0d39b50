#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tabrag {

using CsvRecord = std::vector<std::string>;

// Parses comma-separated text with optional double-quoted fields ("" is an
// escaped quote; quoted fields may span lines). A trailing newline does not
// produce an empty record, and a leading UTF-8 BOM is skipped.
std::vector<CsvRecord> parse_csv(std::string_view text);

std::vector<CsvRecord> read_csv_file(const std::filesystem::path& path);

// Quotes the field only when it contains a comma, quote, or line break.
std::string csv_escape(std::string_view field);

std::string csv_line(const CsvRecord& fields);

std::string read_text_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view text);

// Whole-string decimal parse (surrounding whitespace allowed). Returns
// nullopt for empty or malformed text and for non-finite results.
std::optional<double> parse_number(std::string_view text);

// Shortest round-trip representation of a finite double ("1.5", "42",
// "1e-07"). NaN renders as an empty string.
std::string format_number(double value);

std::string to_lower(std::string_view text);

std::string_view trim(std::string_view text);

}  // namespace tabrag
