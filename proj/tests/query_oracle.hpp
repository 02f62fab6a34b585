#pragma once

// Naive reference evaluator for smartviz queries plus random frame and
// query generators. Values are compared through their own dtype-aware
// comparison, groups are found by linear scan, output is sorted afterwards.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "flowforge/smartviz.hpp"

namespace oracle {

using flowforge::Column;
using flowforge::DType;
using flowforge::Row;
using flowforge::TableFrame;
using flowforge::Value;

inline int cmp(const Value& a, const Value& b) {
  if (a.index() != b.index()) return a.index() < b.index() ? -1 : 1;
  if (auto* s = std::get_if<std::string>(&a)) {
    const auto& t = std::get<std::string>(b);
    return *s < t ? -1 : (t < *s ? 1 : 0);
  }
  if (auto* i = std::get_if<std::int64_t>(&a)) {
    auto j = std::get<std::int64_t>(b);
    return *i < j ? -1 : (j < *i ? 1 : 0);
  }
  if (auto* d = std::get_if<double>(&a)) {
    auto e = std::get<double>(b);
    return *d < e ? -1 : (e < *d ? 1 : 0);
  }
  return static_cast<int>(std::get<bool>(a)) - static_cast<int>(std::get<bool>(b));
}

inline Value literal_value(const nlohmann::json& lit, DType dtype) {
  switch (dtype) {
    case DType::kString: return lit.get<std::string>();
    case DType::kInt: return lit.get<std::int64_t>();
    case DType::kFloat: return lit.get<double>();
    case DType::kBool: return lit.get<bool>();
  }
  return {};
}

inline std::size_t col(const TableFrame& f, const std::string& name) {
  for (std::size_t i = 0; i < f.num_columns(); ++i) {
    if (f.schema()[i].name == name) return i;
  }
  throw std::runtime_error("oracle: no column " + name);
}

inline bool keep(const Row& row, const TableFrame& f, const flowforge::viz::Filter& flt) {
  auto c = col(f, flt.column);
  if (flt.op == "contains") {
    return flowforge::value_to_string(row[c]).find(flt.literal.get<std::string>()) != std::string::npos;
  }
  int r = cmp(row[c], literal_value(flt.literal, f.schema()[c].dtype));
  if (flt.op == "=") return r == 0;
  if (flt.op == "!=") return r != 0;
  if (flt.op == "<") return r < 0;
  if (flt.op == "<=") return r <= 0;
  if (flt.op == ">") return r > 0;
  return r >= 0;
}

inline TableFrame evaluate(const TableFrame& f, const flowforge::viz::QuerySpec& q) {
  std::vector<Row> rows;
  for (const auto& row : f.rows()) {
    bool ok = true;
    for (const auto& flt : q.filters) ok = ok && keep(row, f, flt);
    if (ok) rows.push_back(row);
  }
  TableFrame mid;
  if (q.group_by.empty() && q.aggregates.empty()) {
    mid = TableFrame(f.schema(), rows);
  } else {
    std::vector<Column> schema;
    for (const auto& g : q.group_by) schema.push_back(f.schema()[col(f, g)]);
    for (const auto& a : q.aggregates) {
      DType t = DType::kInt;
      if (a.fn == "avg") t = DType::kFloat;
      else if (a.fn != "count") t = f.schema()[col(f, *a.column)].dtype;
      schema.push_back({a.output_name(), t});
    }
    std::vector<Row> keys;
    std::vector<std::vector<Row>> members;
    for (const auto& row : rows) {
      Row key;
      for (const auto& g : q.group_by) key.push_back(row[col(f, g)]);
      std::size_t at = keys.size();
      for (std::size_t i = 0; i < keys.size(); ++i) {
        bool same = true;
        for (std::size_t k = 0; k < key.size(); ++k) same = same && cmp(key[k], keys[i][k]) == 0;
        if (same) {
          at = i;
          break;
        }
      }
      if (at == keys.size()) {
        keys.push_back(key);
        members.emplace_back();
      }
      members[at].push_back(row);
    }
    std::vector<Row> out;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      Row r = keys[i];
      for (const auto& a : q.aggregates) {
        const auto& m = members[i];
        if (a.fn == "count") {
          r.emplace_back(static_cast<std::int64_t>(m.size()));
          continue;
        }
        auto c = col(f, *a.column);
        if (a.fn == "min" || a.fn == "max") {
          Value best = m[0][c];
          for (const auto& x : m) {
            int s = cmp(x[c], best);
            if (a.fn == "min" ? s < 0 : s > 0) best = x[c];
          }
          r.push_back(best);
        } else if (a.fn == "sum" && f.schema()[c].dtype == DType::kInt) {
          std::int64_t s = 0;
          for (const auto& x : m) s += std::get<std::int64_t>(x[c]);
          r.emplace_back(s);
        } else {
          double s = 0;
          for (const auto& x : m) s += flowforge::value_as_double(x[c]);
          r.emplace_back(a.fn == "avg" ? s / static_cast<double>(m.size()) : s);
        }
      }
      out.push_back(std::move(r));
    }
    auto n = q.group_by.size();
    std::sort(out.begin(), out.end(), [n](const Row& a, const Row& b) {
      for (std::size_t k = 0; k < n; ++k) {
        int c = cmp(a[k], b[k]);
        if (c != 0) return c < 0;
      }
      return false;
    });
    mid = TableFrame(schema, out);
  }
  TableFrame res = mid;
  if (!q.select.empty()) {
    std::vector<Column> schema;
    for (const auto& s : q.select) schema.push_back(mid.schema()[col(mid, s)]);
    std::vector<Row> out;
    for (const auto& row : mid.rows()) {
      Row r;
      for (const auto& s : q.select) r.push_back(row[col(mid, s)]);
      out.push_back(std::move(r));
    }
    res = TableFrame(schema, out);
  }
  if (q.limit && res.num_rows() > *q.limit) {
    std::vector<Row> cut(res.rows().begin(), res.rows().begin() + static_cast<std::ptrdiff_t>(*q.limit));
    res = TableFrame(res.schema(), cut);
  }
  return res;
}

/// Frame with columns city:string, kind:int, price:float, qty:int, ok:bool.
inline TableFrame random_frame(std::mt19937_64& rng, std::size_t rows) {
  static const char* kCities[] = {"ams", "ber", "lis", "osl", "rom", "vie"};
  TableFrame f({{"city", DType::kString}, {"kind", DType::kInt}, {"price", DType::kFloat},
                {"qty", DType::kInt}, {"ok", DType::kBool}});
  for (std::size_t i = 0; i < rows; ++i) {
    f.append_row({std::string(kCities[rng() % 6]), static_cast<std::int64_t>(rng() % 4),
                  static_cast<double>(rng() % 10000) / 100.0, static_cast<std::int64_t>(rng() % 50) - 10,
                  rng() % 2 == 0});
  }
  return f;
}

inline flowforge::viz::QuerySpec random_query(std::mt19937_64& rng) {
  static const char* kOps[] = {"=", "!=", "<", "<=", ">", ">="};
  static const char* kCities[] = {"ams", "ber", "lis", "osl", "rom", "vie"};
  flowforge::viz::QuerySpec q;
  q.table = "t";
  auto nfilters = rng() % 3;
  for (std::size_t i = 0; i < nfilters; ++i) {
    switch (rng() % 5) {
      case 0: q.filters.push_back({"city", kOps[rng() % 6], kCities[rng() % 6]}); break;
      case 1: q.filters.push_back({"kind", kOps[rng() % 6], static_cast<std::int64_t>(rng() % 4)}); break;
      case 2: q.filters.push_back({"price", kOps[rng() % 6], static_cast<double>(rng() % 100)}); break;
      case 3: q.filters.push_back({"ok", rng() % 2 ? "=" : "!=", rng() % 2 == 0}); break;
      default: q.filters.push_back({"city", "contains", std::string(1, "aeiors"[rng() % 6])}); break;
    }
  }
  static const char* kKeys[] = {"city", "kind", "ok"};
  bool grouped = rng() % 2 == 0;
  if (grouped) {
    auto nkeys = rng() % 3;
    for (std::size_t i = 0; i < nkeys; ++i) {
      std::string k = kKeys[rng() % 3];
      if (std::find(q.group_by.begin(), q.group_by.end(), k) == q.group_by.end()) q.group_by.push_back(k);
    }
    static const char* kFns[] = {"sum", "avg", "min", "max"};
    static const char* kMeasures[] = {"price", "qty"};
    q.aggregates.push_back({"count", std::nullopt});
    std::string fn = kFns[rng() % 4];
    q.aggregates.push_back({fn, std::string(kMeasures[rng() % 2])});
    if (rng() % 2 && !q.group_by.empty()) q.select = {q.group_by.front(), q.aggregates.back().output_name()};
  } else if (rng() % 2) {
    q.select = {"price", "city"};
  }
  if (rng() % 3 == 0) q.limit = rng() % 20;
  return q;
}

/// Equality with floats compared to 1e-9 relative tolerance.
inline bool frames_match(const TableFrame& a, const TableFrame& b) {
  if (a.schema() != b.schema() || a.num_rows() != b.num_rows()) return false;
  for (std::size_t r = 0; r < a.num_rows(); ++r) {
    for (std::size_t c = 0; c < a.num_columns(); ++c) {
      const auto& x = a.rows()[r][c];
      const auto& y = b.rows()[r][c];
      if (auto* d = std::get_if<double>(&x)) {
        auto e = std::get<double>(y);
        if (std::abs(*d - e) > 1e-9 * std::max(1.0, std::abs(e))) return false;
      } else if (cmp(x, y) != 0) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace oracle
