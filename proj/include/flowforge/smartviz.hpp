#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "flowforge/broker.hpp"
#include "flowforge/error.hpp"
#include "flowforge/frame.hpp"
#include "flowforge/operators/table_store.hpp"

namespace flowforge::viz {

// --- connectors ---------------------------------------------------------------

enum class SourceKind { kInternal, kDelimitedFile, kJsonlFile, kStreamTopic };

std::string_view source_kind_name(SourceKind kind);
/// Throws kUnsupportedKind.
SourceKind parse_source_kind(std::string_view name);

struct DataSourceRef {
  std::string id;
  SourceKind kind = SourceKind::kInternal;
  std::string location;  // file path or topic name; unused for internal
  char delimiter = ',';
  bool header = true;
  std::size_t window = 1000;  // stream-topic sliding window, rows
};

nlohmann::json source_to_json(const DataSourceRef& ref);
DataSourceRef source_from_json(const nlohmann::json& j);

struct TableInfo {
  std::string name;
  std::vector<Column> columns;
  std::size_t row_count = 0;
};

nlohmann::json table_info_to_json(const TableInfo& info);

/// Access to one data source's tables.
class Connector {
 public:
  virtual ~Connector() = default;
  virtual std::vector<TableInfo> tables() = 0;
  /// Throws kNotFound for unknown tables, kUnreachableSource when the
  /// backing data disappeared.
  virtual TableFrame read(const std::string& table) = 0;
};

std::unique_ptr<Connector> make_connector(const DataSourceRef& ref, TableStore& store, Broker& broker);

/// Parses JSONL text: either frame envelopes, one per line, or flat objects
/// whose keys become columns (types inferred per key: int < float < string,
/// bool only when every value is bool). Objects missing a key are rejected.
TableFrame parse_jsonl(std::string_view text);

/// Registered sources; `internal` (the operator table store) always exists.
/// Added sources are persisted to a JSON file when a path is given.
class SourceRegistry {
 public:
  SourceRegistry(TableStore& store, Broker& broker, std::filesystem::path persist_path = {});

  /// Checks file locations up front (kUnreachableSource). An empty id gets
  /// `src-<n>`; a taken id is kInvalidArgument.
  std::string add(DataSourceRef ref);
  std::vector<DataSourceRef> list() const;
  std::vector<TableInfo> tables(const std::string& source_id);
  TableFrame read(const std::string& source_id, const std::string& table);

 private:
  std::shared_ptr<Connector> connector(const std::string& source_id) const;
  void save() const;

  TableStore& store_;
  Broker& broker_;
  std::filesystem::path persist_path_;
  mutable std::mutex mutex_;
  std::vector<DataSourceRef> refs_;
  std::map<std::string, std::shared_ptr<Connector>> connectors_;
  std::size_t next_id_ = 1;
};

// --- queries ------------------------------------------------------------------

struct Filter {
  std::string column;
  std::string op;  // = != < <= > >= contains
  nlohmann::json literal;
};

struct Aggregate {
  std::string fn;  // count sum avg min max
  std::optional<std::string> column;

  /// `<fn>_<column>`, or `count` for a bare count.
  std::string output_name() const;
};

struct QuerySpec {
  std::string source_id = "internal";
  std::string table;
  std::vector<std::string> select;
  std::vector<Filter> filters;
  std::vector<std::string> group_by;
  std::vector<Aggregate> aggregates;
  std::optional<std::size_t> limit;
};

nlohmann::json query_to_json(const QuerySpec& spec);
/// Throws kInvalidArgument for malformed specs.
QuerySpec query_from_json(const nlohmann::json& j);

/// Filters (conjunctive), then grouping and aggregation, then projection,
/// then limit. Grouped output is ordered by ascending key, otherwise source
/// order is kept. A global aggregate over no rows yields no rows.
/// Throws kUnknownColumn and kTypeError.
TableFrame run_query(const TableFrame& frame, const QuerySpec& spec);

// --- chart recommendation -----------------------------------------------------

struct ChartRecommendation {
  std::string chart_type;
  std::map<std::string, std::string> encoding;  // x, y, color, value
  double score = 0.0;
  std::string reason;
};

nlohmann::json recommendation_to_json(const ChartRecommendation& r);

struct ColumnStats {
  Column column;
  std::size_t distinct = 0;
};

struct FrameStats {
  std::vector<ColumnStats> columns;
  std::size_t row_count = 0;
};

/// Exact distinct counts up to 10^4 rows; beyond that, counts over a fixed
/// 10^4-row uniform sample.
FrameStats frame_stats(const TableFrame& frame);

/// True for names like ts, time, timestamp, date, datetime, *_ts, *_time,
/// *_at and *_date.
bool is_time_column(std::string_view name);

/// Rule-based ranking, sorted by descending score with ties in rule order.
/// Throws kEmptyFrame when there are no rows.
std::vector<ChartRecommendation> recommend_charts(const FrameStats& stats);
std::vector<ChartRecommendation> recommend_charts(const TableFrame& frame);

// --- refresh ------------------------------------------------------------------

/// Recomputes a query every interval on its own worker and hands each result
/// to a callback. The first emission happens immediately. cancel() returns
/// once no further callback can start; it must not be called from inside a
/// callback.
class RefreshHandle {
 public:
  using FrameCallback = std::function<void(const TableFrame&)>;
  using ErrorCallback = std::function<void(const Error&)>;

  RefreshHandle(std::function<TableFrame()> compute, std::chrono::milliseconds interval,
                FrameCallback on_frame, ErrorCallback on_error);
  ~RefreshHandle();
  RefreshHandle(const RefreshHandle&) = delete;
  RefreshHandle& operator=(const RefreshHandle&) = delete;

  void cancel();
  std::size_t emissions() const { return emissions_; }

 private:
  void loop();

  std::function<TableFrame()> compute_;
  std::chrono::milliseconds interval_;
  FrameCallback on_frame_;
  ErrorCallback on_error_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool cancelled_ = false;
  std::atomic<std::size_t> emissions_{0};
  std::thread worker_;
};

/// Throws kInvalidArgument when interval < 100 ms. Query errors are passed
/// to on_error and the timer keeps running.
std::unique_ptr<RefreshHandle> stream_refresh(SourceRegistry& sources, QuerySpec spec,
                                              std::chrono::milliseconds interval,
                                              RefreshHandle::FrameCallback on_frame,
                                              RefreshHandle::ErrorCallback on_error = {});

}  // namespace flowforge::viz
