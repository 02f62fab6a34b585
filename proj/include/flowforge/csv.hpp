#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "flowforge/frame.hpp"

namespace flowforge {

enum class BadRowPolicy { kSkip, kFail };

struct CsvOptions {
  char delimiter = ',';
  bool header = true;
  /// Optional column specs, each "name" or "name:dtype". Names replace the
  /// header; missing dtypes are inferred.
  std::vector<std::string> schema;
  BadRowPolicy on_bad_row = BadRowPolicy::kSkip;
  /// Rows examined for dtype inference; 0 means all rows.
  std::size_t infer_sample_rows = 0;
};

struct CsvResult {
  TableFrame frame;
  std::size_t skipped_rows = 0;
};

/// Splits RFC-4180 style records. Quoted fields may contain delimiters,
/// doubled quotes and line breaks.
std::vector<std::vector<std::string>> split_csv_records(std::string_view text, char delimiter);

/// Parses delimited text into a typed frame. Per column, dtypes are inferred
/// with int < float < string promotion. `\N` marks a missing value; a row with
/// a missing value, an empty non-string field, or the wrong arity is a bad row.
CsvResult parse_csv(std::string_view text, const CsvOptions& options);
CsvResult read_csv(const std::filesystem::path& path, const CsvOptions& options);

std::string read_file(const std::filesystem::path& path);

}  // namespace flowforge
