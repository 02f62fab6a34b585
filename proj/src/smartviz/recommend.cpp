#include <algorithm>
#include <cctype>
#include <numeric>
#include <random>
#include <set>

#include "flowforge/smartviz.hpp"

namespace flowforge::viz {

using nlohmann::json;

namespace {

constexpr std::size_t kExactLimit = 10000;
constexpr std::size_t kCategoricalMax = 12;
constexpr std::size_t kPieMax = 6;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct ValueLess {
  bool operator()(const Value& a, const Value& b) const { return compare_values(a, b) < 0; }
};

}  // namespace

json recommendation_to_json(const ChartRecommendation& r) {
  return {{"chart_type", r.chart_type}, {"encoding", r.encoding}, {"score", r.score}, {"reason", r.reason}};
}

FrameStats frame_stats(const TableFrame& frame) {
  FrameStats stats;
  stats.row_count = frame.num_rows();
  std::vector<std::size_t> rows(frame.num_rows());
  std::iota(rows.begin(), rows.end(), 0);
  if (rows.size() > kExactLimit) {
    std::vector<std::size_t> sample;
    std::mt19937_64 rng(0);
    std::sample(rows.begin(), rows.end(), std::back_inserter(sample), kExactLimit, rng);
    rows = std::move(sample);
  }
  for (std::size_t c = 0; c < frame.num_columns(); ++c) {
    std::set<Value, ValueLess> distinct;
    for (auto r : rows) distinct.insert(frame.rows()[r][c]);
    stats.columns.push_back({frame.schema()[c], distinct.size()});
  }
  return stats;
}

bool is_time_column(std::string_view name) {
  auto n = lower(name);
  for (const char* exact : {"ts", "time", "timestamp", "date", "datetime"}) {
    if (n == exact) return true;
  }
  for (const char* suffix : {"_ts", "_time", "_at", "_date"}) {
    if (n.size() > std::string_view(suffix).size() && n.ends_with(suffix)) return true;
  }
  return false;
}

std::vector<ChartRecommendation> recommend_charts(const FrameStats& stats) {
  if (stats.row_count == 0) throw Error(Errc::kEmptyFrame, "cannot recommend charts for an empty frame");
  std::vector<const ColumnStats*> num, cat, time;
  for (const auto& c : stats.columns) {
    auto dtype = c.column.dtype;
    if (is_numeric(dtype)) num.push_back(&c);
    if ((dtype == DType::kString || dtype == DType::kInt) && c.distinct <= kCategoricalMax) cat.push_back(&c);
    if (is_time_column(c.column.name)) time.push_back(&c);
  }
  auto others = [](const std::vector<const ColumnStats*>& cols, const ColumnStats* skip) {
    std::vector<const ColumnStats*> out;
    for (const auto* c : cols) {
      if (c != skip) out.push_back(c);
    }
    return out;
  };

  std::vector<ChartRecommendation> out;

  // R1: two numeric columns make a scatter; the least varied categorical
  // column that still leaves two axes colors it.
  if (num.size() >= 2) {
    const ColumnStats* color = nullptr;
    for (const auto* c : cat) {
      if (others(num, c).size() < 2) continue;
      if (!color || c->distinct < color->distinct) color = c;
    }
    auto axes = others(num, color);
    ChartRecommendation r{"scatter", {{"x", axes[0]->column.name}, {"y", axes[1]->column.name}}, 0.9,
                          "two numeric columns"};
    if (color) {
      r.encoding["color"] = color->column.name;
      r.score = 0.95;
      r.reason = "two numeric columns colored by low-cardinality '" + color->column.name + "'";
    }
    out.push_back(std::move(r));
  }

  // R2: a category against a measure.
  for (const auto* c : cat) {
    auto measures = others(num, c);
    if (measures.empty()) continue;
    const auto& y = measures.front()->column.name;
    out.push_back({"bar", {{"x", c->column.name}, {"y", y}}, 0.8,
                   "categorical '" + c->column.name + "' against numeric '" + y + "'"});
    if (c->distinct <= kPieMax) {
      out.push_back({"pie", {{"color", c->column.name}, {"value", y}}, 0.5,
                     "categorical '" + c->column.name + "' with at most 6 values"});
    }
    break;
  }

  // R3: a measure over time.
  if (!time.empty()) {
    auto measures = others(num, time.front());
    if (!measures.empty()) {
      out.push_back({"line", {{"x", time.front()->column.name}, {"y", measures.front()->column.name}}, 0.85,
                     "numeric column over time '" + time.front()->column.name + "'"});
    }
  }

  // R4: a single measure.
  if (num.size() == 1) {
    out.push_back({"histogram", {{"x", num.front()->column.name}}, 0.7, "exactly one numeric column"});
  }

  // R5: hierarchy columns.
  auto find = [&](std::initializer_list<const char*> names) -> const ColumnStats* {
    for (const auto& c : stats.columns) {
      for (const char* n : names) {
        if (lower(c.column.name) == n) return &c;
      }
    }
    return nullptr;
  };
  const auto* parent = find({"parent"});
  const auto* child = find({"child"});
  const auto* id = find({"id"});
  const auto* parent_id = find({"parentid", "parent_id"});
  if (parent && child) {
    out.push_back({"dendrogram", {{"x", child->column.name}, {"y", parent->column.name}}, 0.6,
                   "parent/child hierarchy"});
  } else if (id && parent_id) {
    out.push_back({"dendrogram", {{"x", id->column.name}, {"y", parent_id->column.name}}, 0.6,
                   "id/parentId hierarchy"});
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const ChartRecommendation& a, const ChartRecommendation& b) { return a.score > b.score; });
  return out;
}

std::vector<ChartRecommendation> recommend_charts(const TableFrame& frame) {
  if (frame.empty()) throw Error(Errc::kEmptyFrame, "cannot recommend charts for an empty frame");
  return recommend_charts(frame_stats(frame));
}

}  // namespace flowforge::viz
