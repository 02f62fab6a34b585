#include "flowforge/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "flowforge/error.hpp"

namespace flowforge {
namespace {

constexpr std::string_view kNullMarker = "\\N";

std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string_view digits = s;
  if (digits.front() == '+') digits.remove_prefix(1);
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return out;
}

std::optional<double> parse_float(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string_view body = s;
  if (body.front() == '+') body.remove_prefix(1);
  // from_chars also accepts inf/nan spellings which are not data here.
  for (char c : body) {
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' ||
          c == '-' || c == '+')) {
      return std::nullopt;
    }
  }
  double out = 0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), out);
  if (ec != std::errc() || ptr != body.data() + body.size() || !std::isfinite(out)) {
    return std::nullopt;
  }
  return out;
}

std::optional<bool> parse_bool(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "true") return true;
  if (lower == "false") return false;
  return std::nullopt;
}

bool is_missing(std::string_view field) { return field.empty() || field == kNullMarker; }

std::optional<Value> convert_field(std::string_view field, DType dtype) {
  if (field == kNullMarker) return std::nullopt;
  switch (dtype) {
    case DType::kString:
      return Value(std::string(field));
    case DType::kInt:
      if (auto v = parse_int(field)) return Value(*v);
      return std::nullopt;
    case DType::kFloat:
      if (auto v = parse_float(field)) return Value(*v);
      return std::nullopt;
    case DType::kBool:
      if (auto v = parse_bool(field)) return Value(*v);
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::vector<std::string>> split_csv_records(std::string_view text, char delimiter) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    // A lone empty field is a blank line, not a record.
    if (!(record.size() == 1 && record[0].empty() && !field_started)) {
      records.push_back(std::move(record));
    }
    record.clear();
    field_started = false;
  };
  while (i < text.size()) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
      field_started = true;
    } else if (c == delimiter) {
      record.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // handled with the following \n
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
    ++i;
  }
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

CsvResult parse_csv(std::string_view text, const CsvOptions& options) {
  auto records = split_csv_records(text, options.delimiter);
  std::size_t first = 0;
  std::vector<std::string> names;
  if (options.header && !records.empty()) {
    names = records.front();
    first = 1;
  }

  std::vector<std::optional<DType>> declared;
  if (!options.schema.empty()) {
    names.clear();
    for (const auto& spec : options.schema) {
      auto colon = spec.find(':');
      if (colon == std::string::npos) {
        names.push_back(spec);
        declared.emplace_back();
      } else {
        auto dtype = parse_dtype(std::string_view(spec).substr(colon + 1));
        if (!dtype) throw Error(Errc::kSchemaMismatch, "unknown dtype in schema spec: " + spec);
        names.push_back(spec.substr(0, colon));
        declared.emplace_back(dtype);
      }
    }
  }
  if (names.empty()) {
    std::size_t width = first < records.size() ? records[first].size() : 0;
    for (std::size_t c = 0; c < width; ++c) names.push_back("c" + std::to_string(c));
  }
  declared.resize(names.size());

  // Inference only looks at rows of the right arity.
  std::size_t limit = options.infer_sample_rows == 0
                          ? records.size()
                          : std::min(records.size(), first + options.infer_sample_rows);
  std::vector<Column> schema;
  for (std::size_t c = 0; c < names.size(); ++c) {
    DType dtype = DType::kString;
    if (declared[c]) {
      dtype = *declared[c];
    } else {
      bool any = false;
      bool all_int = true;
      bool all_float = true;
      for (std::size_t r = first; r < limit; ++r) {
        const auto& rec = records[r];
        if (rec.size() != names.size() || is_missing(rec[c])) continue;
        any = true;
        if (all_int && !parse_int(rec[c])) all_int = false;
        if (all_float && !parse_float(rec[c])) all_float = false;
        if (!all_int && !all_float) break;
      }
      if (any && all_int) {
        dtype = DType::kInt;
      } else if (any && all_float) {
        dtype = DType::kFloat;
      }
    }
    schema.push_back({names[c], dtype});
  }

  CsvResult result{TableFrame(schema), 0};
  auto& rows = result.frame.mutable_rows();
  for (std::size_t r = first; r < records.size(); ++r) {
    const auto& rec = records[r];
    bool ok = rec.size() == schema.size();
    Row row;
    if (ok) {
      row.reserve(schema.size());
      for (std::size_t c = 0; c < schema.size(); ++c) {
        auto v = convert_field(rec[c], schema[c].dtype);
        if (!v) {
          ok = false;
          break;
        }
        row.push_back(std::move(*v));
      }
    }
    if (!ok) {
      if (options.on_bad_row == BadRowPolicy::kFail) {
        throw Error(Errc::kSchemaMismatch, "bad row at record " + std::to_string(r + 1),
                    {{"record", r + 1}});
      }
      ++result.skipped_rows;
      continue;
    }
    rows.push_back(std::move(row));
  }
  return result;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot read " + path.string(), {{"path", path.string()}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvResult read_csv(const std::filesystem::path& path, const CsvOptions& options) {
  return parse_csv(read_file(path), options);
}

}  // namespace flowforge
