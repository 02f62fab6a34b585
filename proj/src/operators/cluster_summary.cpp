#include <map>

#include "flowforge/error.hpp"
#include "flowforge/operators/algorithms.hpp"

namespace flowforge::ops {

TableFrame cluster_summary(const TableFrame& frame, std::string_view cluster_column) {
  std::size_t cidx = frame.column_index(cluster_column);
  if (frame.schema()[cidx].dtype != DType::kInt) {
    throw Error(Errc::kColumnTypeError, "cluster column must be int",
                {{"column", std::string(cluster_column)}});
  }
  std::vector<std::size_t> numeric;
  for (std::size_t i = 0; i < frame.num_columns(); ++i) {
    if (i != cidx && is_numeric(frame.schema()[i].dtype)) numeric.push_back(i);
  }
  struct Acc {
    std::int64_t count = 0;
    std::vector<double> sums;
  };
  std::map<std::int64_t, Acc> groups;
  for (const auto& row : frame.rows()) {
    auto& acc = groups[std::get<std::int64_t>(row[cidx])];
    if (acc.sums.empty()) acc.sums.assign(numeric.size(), 0.0);
    ++acc.count;
    for (std::size_t j = 0; j < numeric.size(); ++j) acc.sums[j] += value_as_double(row[numeric[j]]);
  }
  std::vector<Column> schema{{std::string(cluster_column), DType::kInt},
                             {"count", DType::kInt},
                             {"pct", DType::kFloat}};
  for (auto i : numeric) schema.push_back({"mean_" + frame.schema()[i].name, DType::kFloat});
  TableFrame out(schema);
  const double total = static_cast<double>(frame.num_rows());
  for (const auto& [cluster, acc] : groups) {
    Row row{cluster, acc.count, 100.0 * static_cast<double>(acc.count) / total};
    for (double s : acc.sums) row.emplace_back(s / static_cast<double>(acc.count));
    out.mutable_rows().push_back(std::move(row));
  }
  return out;
}

}  // namespace flowforge::ops
