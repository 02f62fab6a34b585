#include "flowforge/frame.hpp"

#include <algorithm>

#include "flowforge/error.hpp"

namespace flowforge {

using nlohmann::json;

std::string_view dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kString: return "string";
    case DType::kInt: return "int";
    case DType::kFloat: return "float";
    case DType::kBool: return "bool";
  }
  return "string";
}

std::optional<DType> parse_dtype(std::string_view name) {
  if (name == "string") return DType::kString;
  if (name == "int") return DType::kInt;
  if (name == "float") return DType::kFloat;
  if (name == "bool") return DType::kBool;
  return std::nullopt;
}

DType value_dtype(const Value& value) {
  switch (value.index()) {
    case 0: return DType::kString;
    case 1: return DType::kInt;
    case 2: return DType::kFloat;
    default: return DType::kBool;
  }
}

bool value_conforms(const Value& value, DType dtype) {
  return value_dtype(value) == dtype;
}

double value_as_double(const Value& value) {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&value)) return *d;
  throw Error(Errc::kColumnTypeError, "value is not numeric");
}

std::string value_to_string(const Value& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          return json(v).dump();
        } else {
          return std::to_string(v);
        }
      },
      value);
}

int compare_values(const Value& lhs, const Value& rhs) {
  if (lhs.index() != rhs.index()) {
    return lhs.index() < rhs.index() ? -1 : 1;
  }
  return std::visit(
      [&rhs](const auto& l) -> int {
        using T = std::decay_t<decltype(l)>;
        const auto& r = std::get<T>(rhs);
        if (l < r) return -1;
        if (r < l) return 1;
        return 0;
      },
      lhs);
}

json value_to_json(const Value& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

Value value_from_json(const json& j, DType dtype) {
  switch (dtype) {
    case DType::kString:
      if (j.is_string()) return j.get<std::string>();
      break;
    case DType::kInt:
      if (j.is_number_integer()) return j.get<std::int64_t>();
      break;
    case DType::kFloat:
      if (j.is_number()) return j.get<double>();
      break;
    case DType::kBool:
      if (j.is_boolean()) return j.get<bool>();
      break;
  }
  throw Error(Errc::kSchemaMismatch,
              "value " + j.dump() + " does not conform to dtype " + std::string(dtype_name(dtype)));
}

TableFrame::TableFrame(std::vector<Column> schema, std::vector<Row> rows)
    : schema_(std::move(schema)) {
  rows_.reserve(rows.size());
  for (auto& row : rows) append_row(std::move(row));
}

std::optional<std::size_t> TableFrame::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    if (schema_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t TableFrame::column_index(std::string_view name) const {
  if (auto idx = find_column(name)) return *idx;
  throw Error(Errc::kColumnNotFound, "column not found: " + std::string(name),
              {{"column", std::string(name)}});
}

void TableFrame::append_row(Row row) {
  if (row.size() != schema_.size()) {
    throw Error(Errc::kSchemaMismatch, "row arity " + std::to_string(row.size()) +
                                           " does not match schema arity " +
                                           std::to_string(schema_.size()));
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!value_conforms(row[i], schema_[i].dtype)) {
      throw Error(Errc::kSchemaMismatch, "value in column '" + schema_[i].name +
                                             "' does not conform to " +
                                             std::string(dtype_name(schema_[i].dtype)));
    }
  }
  rows_.push_back(std::move(row));
}

void TableFrame::append_column(Column column, std::vector<Value> values) {
  if (find_column(column.name)) {
    throw Error(Errc::kSchemaMismatch, "duplicate column '" + column.name + "'");
  }
  if (values.size() != rows_.size()) {
    throw Error(Errc::kSchemaMismatch, "column length does not match row count");
  }
  for (const auto& v : values) {
    if (!value_conforms(v, column.dtype)) {
      throw Error(Errc::kSchemaMismatch, "value does not conform to column '" + column.name + "'");
    }
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) rows_[i].push_back(std::move(values[i]));
  schema_.push_back(std::move(column));
}

void TableFrame::append(const TableFrame& other) {
  if (other.schema_ != schema_) {
    throw Error(Errc::kSchemaMismatch, "cannot append frames with different schemas");
  }
  rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

TableFrame concat_frames(std::span<const TableFrame> frames) {
  if (frames.empty()) return TableFrame{};
  TableFrame out(frames.front().schema());
  for (const auto& f : frames) out.append(f);
  return out;
}

json schema_to_json(const std::vector<Column>& schema) {
  json out = json::array();
  for (const auto& c : schema) {
    out.push_back({{"name", c.name}, {"dtype", dtype_name(c.dtype)}});
  }
  return out;
}

std::vector<Column> schema_from_json(const json& j) {
  if (!j.is_array()) throw Error(Errc::kSchemaMismatch, "schema must be an array");
  std::vector<Column> schema;
  for (const auto& c : j) {
    if (!c.is_object() || !c.contains("name") || !c["name"].is_string() ||
        !c.contains("dtype") || !c["dtype"].is_string()) {
      throw Error(Errc::kSchemaMismatch, "schema entries need string name and dtype");
    }
    auto dtype = parse_dtype(c["dtype"].get<std::string>());
    if (!dtype) throw Error(Errc::kSchemaMismatch, "unknown dtype " + c["dtype"].dump());
    schema.push_back({c["name"].get<std::string>(), *dtype});
  }
  return schema;
}

json frame_to_json(const TableFrame& frame) {
  json rows = json::array();
  for (const auto& row : frame.rows()) {
    json r = json::array();
    for (const auto& v : row) r.push_back(value_to_json(v));
    rows.push_back(std::move(r));
  }
  return {{"schema", schema_to_json(frame.schema())}, {"rows", std::move(rows)}};
}

TableFrame frame_from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema") || !j.contains("rows") || !j["rows"].is_array()) {
    throw Error(Errc::kSchemaMismatch, "frame envelope needs schema and rows");
  }
  TableFrame frame(schema_from_json(j["schema"]));
  const auto& schema = frame.schema();
  for (const auto& r : j["rows"]) {
    if (!r.is_array() || r.size() != schema.size()) {
      throw Error(Errc::kSchemaMismatch, "row arity does not match schema");
    }
    Row row;
    row.reserve(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) {
      row.push_back(value_from_json(r[i], schema[i].dtype));
    }
    frame.mutable_rows().push_back(std::move(row));
  }
  return frame;
}

std::string encode_frame(const TableFrame& frame) { return frame_to_json(frame).dump(); }

TableFrame decode_frame(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::kSchemaMismatch, "frame envelope is not valid JSON");
  return frame_from_json(j);
}

}  // namespace flowforge
