#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace flowforge {

enum class DType { kString, kInt, kFloat, kBool };

std::string_view dtype_name(DType dtype);
std::optional<DType> parse_dtype(std::string_view name);

inline bool is_numeric(DType dtype) {
  return dtype == DType::kInt || dtype == DType::kFloat;
}

/// A single cell. Nulls are not representable: sources impute or reject.
using Value = std::variant<std::string, std::int64_t, double, bool>;

DType value_dtype(const Value& value);
bool value_conforms(const Value& value, DType dtype);
/// Numeric view of an int or float cell; throws kColumnTypeError otherwise.
double value_as_double(const Value& value);
std::string value_to_string(const Value& value);
/// Total order within one dtype; mixed dtypes order by dtype index.
int compare_values(const Value& lhs, const Value& rhs);

nlohmann::json value_to_json(const Value& value);
/// Reads a JSON scalar as the given dtype; throws kSchemaMismatch on mismatch.
Value value_from_json(const nlohmann::json& json, DType dtype);

struct Column {
  std::string name;
  DType dtype = DType::kString;

  bool operator==(const Column&) const = default;
};

using Row = std::vector<Value>;

/// Columnar-typed, row-stored table that flows between operators.
class TableFrame {
 public:
  TableFrame() = default;
  explicit TableFrame(std::vector<Column> schema) : schema_(std::move(schema)) {}
  TableFrame(std::vector<Column> schema, std::vector<Row> rows);

  const std::vector<Column>& schema() const { return schema_; }
  const std::vector<Row>& rows() const { return rows_; }
  std::vector<Row>& mutable_rows() { return rows_; }

  std::size_t num_rows() const { return rows_.size(); }
  std::size_t num_columns() const { return schema_.size(); }
  bool empty() const { return rows_.empty(); }

  std::optional<std::size_t> find_column(std::string_view name) const;
  /// Like find_column but throws kColumnNotFound.
  std::size_t column_index(std::string_view name) const;

  /// Appends a row after checking arity and dtypes.
  void append_row(Row row);
  void append_column(Column column, std::vector<Value> values);
  /// Appends all rows of a frame with an identical schema.
  void append(const TableFrame& other);

  bool operator==(const TableFrame&) const = default;

 private:
  std::vector<Column> schema_;
  std::vector<Row> rows_;
};

/// Concatenates frames sharing one schema; throws kSchemaMismatch otherwise.
TableFrame concat_frames(std::span<const TableFrame> frames);

/// Frame envelope: {"schema":[{"name":..,"dtype":..}],"rows":[[..],..]}.
nlohmann::json frame_to_json(const TableFrame& frame);
TableFrame frame_from_json(const nlohmann::json& json);
std::string encode_frame(const TableFrame& frame);
TableFrame decode_frame(std::string_view text);

nlohmann::json schema_to_json(const std::vector<Column>& schema);
std::vector<Column> schema_from_json(const nlohmann::json& json);

}  // namespace flowforge
