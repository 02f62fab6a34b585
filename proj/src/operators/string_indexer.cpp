#include <algorithm>
#include <map>

#include "flowforge/error.hpp"
#include "flowforge/operators/algorithms.hpp"

namespace flowforge::ops {

std::vector<std::string> rank_labels(std::span<const std::string> labels) {
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already label-ordered, so a stable sort keeps the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (auto& [label, count] : ranked) out.push_back(std::move(label));
  return out;
}

TableFrame string_indexer(const TableFrame& frame, std::span<const std::string> columns) {
  if (frame.empty()) throw Error(Errc::kEmptyFrame, "string-indexer needs a non-empty frame");
  TableFrame out = frame;
  for (const auto& column : columns) {
    std::size_t idx = frame.column_index(column);
    if (frame.schema()[idx].dtype != DType::kString) {
      throw Error(Errc::kColumnTypeError, "column '" + column + "' is not a string column",
                  {{"column", column}});
    }
    std::vector<std::string> labels;
    labels.reserve(frame.num_rows());
    for (const auto& row : frame.rows()) labels.push_back(std::get<std::string>(row[idx]));
    auto ranked = rank_labels(labels);
    std::map<std::string_view, std::int64_t> index;
    for (std::size_t i = 0; i < ranked.size(); ++i) index.emplace(ranked[i], static_cast<std::int64_t>(i));
    std::vector<Value> values;
    values.reserve(labels.size());
    for (const auto& l : labels) values.emplace_back(index.at(l));
    out.append_column({column + "_idx", DType::kInt}, std::move(values));
  }
  return out;
}

}  // namespace flowforge::ops
