#include <algorithm>
#include <map>
#include <regex>
#include <set>

#include "flowforge/smartviz.hpp"

namespace flowforge::viz {

using nlohmann::json;

namespace {

const std::set<std::string> kOps = {"=", "!=", "<", "<=", ">", ">=", "contains"};
const std::set<std::string> kFns = {"count", "sum", "avg", "min", "max"};

std::size_t column_of(const TableFrame& frame, const std::string& name) {
  auto idx = frame.find_column(name);
  if (!idx) throw Error(Errc::kUnknownColumn, "unknown column '" + name + "'", {{"column", name}});
  return *idx;
}

Value coerce_literal(const Filter& f, DType dtype) {
  auto fail = [&] {
    return Error(Errc::kTypeError,
                 "literal " + f.literal.dump() + " does not fit column '" + f.column + "' (" +
                     std::string(dtype_name(dtype)) + ")",
                 {{"column", f.column}, {"dtype", dtype_name(dtype)}});
  };
  const auto& lit = f.literal;
  if (f.op == "contains") {
    if (!lit.is_string()) throw fail();
    return lit.get<std::string>();
  }
  static const std::regex int_re("[+-]?[0-9]+");
  static const std::regex float_re("[+-]?([0-9]+\\.?[0-9]*|\\.[0-9]+)([eE][+-]?[0-9]+)?");
  switch (dtype) {
    case DType::kString:
      if (!lit.is_string()) throw fail();
      return lit.get<std::string>();
    case DType::kInt:
      if (lit.is_number_integer()) return lit.get<std::int64_t>();
      if (lit.is_string() && std::regex_match(lit.get<std::string>(), int_re)) {
        try {
          return static_cast<std::int64_t>(std::stoll(lit.get<std::string>()));
        } catch (const std::exception&) {
        }
      }
      throw fail();
    case DType::kFloat:
      if (lit.is_number()) return lit.get<double>();
      if (lit.is_string() && std::regex_match(lit.get<std::string>(), float_re)) {
        return std::stod(lit.get<std::string>());
      }
      throw fail();
    case DType::kBool:
      if (lit.is_boolean()) return lit.get<bool>();
      if (lit == "true") return true;
      if (lit == "false") return false;
      throw fail();
  }
  throw fail();
}

bool matches(const Value& cell, const std::string& op, const Value& rhs) {
  if (op == "contains") return value_to_string(cell).find(std::get<std::string>(rhs)) != std::string::npos;
  int c = compare_values(cell, rhs);
  if (op == "=") return c == 0;
  if (op == "!=") return c != 0;
  if (op == "<") return c < 0;
  if (op == "<=") return c <= 0;
  if (op == ">") return c > 0;
  return c >= 0;
}

struct KeyLess {
  bool operator()(const Row& a, const Row& b) const {
    for (std::size_t i = 0; i < a.size(); ++i) {
      int c = compare_values(a[i], b[i]);
      if (c != 0) return c < 0;
    }
    return false;
  }
};

}  // namespace

std::string Aggregate::output_name() const { return column ? fn + "_" + *column : fn; }

json query_to_json(const QuerySpec& s) {
  json filters = json::array();
  for (const auto& f : s.filters) filters.push_back({{"column", f.column}, {"op", f.op}, {"literal", f.literal}});
  json aggs = json::array();
  for (const auto& a : s.aggregates) aggs.push_back({{"fn", a.fn}, {"column", a.column ? json(*a.column) : json(nullptr)}});
  return {{"source_id", s.source_id}, {"table", s.table},       {"select", s.select},
          {"filters", filters},       {"group_by", s.group_by}, {"aggregates", aggs},
          {"limit", s.limit ? json(*s.limit) : json(nullptr)}};
}

QuerySpec query_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::kInvalidArgument, "query must be an object");
  QuerySpec s;
  try {
    s.source_id = j.value("source_id", s.source_id);
    s.table = j.at("table").get<std::string>();
    s.select = j.value("select", std::vector<std::string>{});
    for (const auto& f : j.value("filters", json::array())) {
      Filter filter{f.at("column").get<std::string>(), f.value("op", std::string("=")), f.at("literal")};
      if (!kOps.count(filter.op)) throw Error(Errc::kInvalidArgument, "unknown filter op '" + filter.op + "'");
      s.filters.push_back(std::move(filter));
    }
    s.group_by = j.value("group_by", std::vector<std::string>{});
    for (const auto& a : j.value("aggregates", json::array())) {
      Aggregate agg{a.at("fn").get<std::string>(), std::nullopt};
      if (a.contains("column") && !a["column"].is_null()) agg.column = a["column"].get<std::string>();
      if (!kFns.count(agg.fn)) throw Error(Errc::kInvalidArgument, "unknown aggregate '" + agg.fn + "'");
      if (!agg.column && agg.fn != "count") {
        throw Error(Errc::kInvalidArgument, "aggregate '" + agg.fn + "' needs a column");
      }
      s.aggregates.push_back(std::move(agg));
    }
    if (j.contains("limit") && !j["limit"].is_null()) {
      if (!j["limit"].is_number_integer() || j["limit"].get<std::int64_t>() < 0) {
        throw Error(Errc::kInvalidArgument, "limit must be a non-negative integer");
      }
      s.limit = j["limit"].get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("malformed query: ") + e.what());
  }
  return s;
}

TableFrame run_query(const TableFrame& frame, const QuerySpec& spec) {
  // Resolve everything up front so errors do not depend on the data.
  std::vector<std::pair<std::size_t, Value>> filters;
  for (const auto& f : spec.filters) {
    if (!kOps.count(f.op)) throw Error(Errc::kInvalidArgument, "unknown filter op '" + f.op + "'");
    auto idx = column_of(frame, f.column);
    filters.emplace_back(idx, coerce_literal(f, frame.schema()[idx].dtype));
  }
  std::vector<std::size_t> keys;
  for (const auto& g : spec.group_by) keys.push_back(column_of(frame, g));
  std::vector<std::optional<std::size_t>> agg_cols;
  for (const auto& a : spec.aggregates) {
    if (!kFns.count(a.fn)) throw Error(Errc::kInvalidArgument, "unknown aggregate '" + a.fn + "'");
    if (!a.column) {
      if (a.fn != "count") throw Error(Errc::kInvalidArgument, "aggregate '" + a.fn + "' needs a column");
      agg_cols.emplace_back();
      continue;
    }
    auto idx = column_of(frame, *a.column);
    if ((a.fn == "sum" || a.fn == "avg") && !is_numeric(frame.schema()[idx].dtype)) {
      throw Error(Errc::kTypeError, a.fn + " needs a numeric column, '" + *a.column + "' is not",
                  {{"column", *a.column}});
    }
    agg_cols.push_back(idx);
  }

  std::vector<const Row*> kept;
  for (const auto& row : frame.rows()) {
    bool ok = true;
    for (std::size_t i = 0; i < filters.size() && ok; ++i) {
      ok = matches(row[filters[i].first], spec.filters[i].op, filters[i].second);
    }
    if (ok) kept.push_back(&row);
  }

  TableFrame grouped;
  if (keys.empty() && spec.aggregates.empty()) {
    grouped = TableFrame(frame.schema());
    for (const auto* r : kept) grouped.mutable_rows().push_back(*r);
  } else {
    std::vector<Column> schema;
    std::set<std::string> names;
    for (auto k : keys) {
      schema.push_back(frame.schema()[k]);
      names.insert(frame.schema()[k].name);
    }
    for (std::size_t a = 0; a < spec.aggregates.size(); ++a) {
      const auto& agg = spec.aggregates[a];
      DType dtype = DType::kInt;
      if (agg.fn == "avg") dtype = DType::kFloat;
      if (agg.fn == "sum" || agg.fn == "min" || agg.fn == "max") dtype = frame.schema()[*agg_cols[a]].dtype;
      auto name = agg.output_name();
      if (!names.insert(name).second) {
        throw Error(Errc::kInvalidArgument, "duplicate output column '" + name + "'", {{"column", name}});
      }
      schema.push_back({name, dtype});
    }
    std::map<Row, std::vector<const Row*>, KeyLess> groups;
    for (const auto* r : kept) {
      Row key;
      for (auto k : keys) key.push_back((*r)[k]);
      groups[std::move(key)].push_back(r);
    }
    grouped = TableFrame(schema);
    for (const auto& [key, members] : groups) {
      Row out = key;
      for (std::size_t a = 0; a < spec.aggregates.size(); ++a) {
        const auto& fn = spec.aggregates[a].fn;
        if (fn == "count") {
          out.emplace_back(static_cast<std::int64_t>(members.size()));
          continue;
        }
        auto col = *agg_cols[a];
        DType dtype = frame.schema()[col].dtype;
        if (fn == "sum" || fn == "avg") {
          if (dtype == DType::kInt && fn == "sum") {
            std::int64_t total = 0;
            for (const auto* m : members) total += std::get<std::int64_t>((*m)[col]);
            out.emplace_back(total);
          } else {
            double total = 0.0;
            for (const auto* m : members) total += value_as_double((*m)[col]);
            out.emplace_back(fn == "avg" ? total / static_cast<double>(members.size()) : total);
          }
        } else {
          const Value* best = &(*members.front())[col];
          for (const auto* m : members) {
            int c = compare_values((*m)[col], *best);
            if ((fn == "min" && c < 0) || (fn == "max" && c > 0)) best = &(*m)[col];
          }
          out.push_back(*best);
        }
      }
      grouped.mutable_rows().push_back(std::move(out));
    }
  }

  TableFrame result;
  if (spec.select.empty()) {
    result = std::move(grouped);
  } else {
    std::vector<std::size_t> picks;
    std::vector<Column> schema;
    for (const auto& s : spec.select) {
      picks.push_back(column_of(grouped, s));
      schema.push_back(grouped.schema()[picks.back()]);
    }
    result = TableFrame(schema);
    for (const auto& row : grouped.rows()) {
      Row out;
      for (auto p : picks) out.push_back(row[p]);
      result.mutable_rows().push_back(std::move(out));
    }
  }
  if (spec.limit && result.num_rows() > *spec.limit) {
    result.mutable_rows().resize(*spec.limit);
  }
  return result;
}

}  // namespace flowforge::viz
