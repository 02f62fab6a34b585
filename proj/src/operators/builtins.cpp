#include <chrono>
#include <set>
#include <thread>

#include "flowforge/csv.hpp"
#include "flowforge/error.hpp"
#include "flowforge/operators/algorithms.hpp"
#include "flowforge/operators/operator.hpp"

namespace flowforge {
namespace {

std::string str_binding(const Bindings& b, const std::string& key) {
  auto it = b.find(key);
  if (it == b.end()) throw Error(Errc::kInvalidArgument, "missing binding '" + key + "'");
  return value_to_string(it->second);
}

std::int64_t int_binding(const Bindings& b, const std::string& key) {
  auto it = b.find(key);
  if (it == b.end() || !std::holds_alternative<std::int64_t>(it->second)) {
    throw Error(Errc::kInvalidArgument, "missing int binding '" + key + "'");
  }
  return std::get<std::int64_t>(it->second);
}

double float_binding(const Bindings& b, const std::string& key) {
  auto it = b.find(key);
  if (it == b.end()) throw Error(Errc::kInvalidArgument, "missing binding '" + key + "'");
  return value_as_double(it->second);
}

bool bool_binding(const Bindings& b, const std::string& key) {
  auto it = b.find(key);
  if (it == b.end() || !std::holds_alternative<bool>(it->second)) {
    throw Error(Errc::kInvalidArgument, "missing bool binding '" + key + "'");
  }
  return std::get<bool>(it->second);
}

TableFrame single_input(std::span<const TableFrame> inputs, const char* op) {
  if (inputs.empty()) {
    throw Error(Errc::kInvalidArgument, std::string(op) + " needs an upstream frame");
  }
  return inputs.size() == 1 ? inputs.front() : concat_frames(inputs);
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// --- sources ----------------------------------------------------------------

class FileSource : public Operator {
 public:
  void setup(const Bindings& b, const OperatorContext&) override {
    CsvOptions options;
    auto delimiter = str_binding(b, "delimiter");
    if (delimiter == "\\t" || delimiter == "tab") delimiter = "\t";
    if (delimiter.size() != 1) throw Error(Errc::kInvalidArgument, "delimiter must be one character");
    options.delimiter = delimiter.front();
    options.header = bool_binding(b, "header");
    options.schema = split_list(str_binding(b, "schema"));
    options.on_bad_row =
        str_binding(b, "on-bad-row") == "fail" ? BadRowPolicy::kFail : BadRowPolicy::kSkip;
    batch_size_ = static_cast<std::size_t>(std::max<std::int64_t>(1, int_binding(b, "batch-size")));
    auto result = read_csv(str_binding(b, "path"), options);
    frame_ = std::move(result.frame);
    skipped_ = result.skipped_rows;
  }

  std::vector<TableFrame> process(std::span<const TableFrame>) override { return {frame_}; }

  std::optional<TableFrame> next_batch() override {
    if (cursor_ >= frame_.num_rows()) return std::nullopt;
    std::size_t end = std::min(frame_.num_rows(), cursor_ + batch_size_);
    TableFrame batch(frame_.schema());
    batch.mutable_rows().assign(frame_.rows().begin() + static_cast<std::ptrdiff_t>(cursor_),
                                frame_.rows().begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return batch;
  }

  bool exhausted() const override { return cursor_ >= frame_.num_rows(); }

 private:
  TableFrame frame_;
  std::size_t skipped_ = 0;
  std::size_t batch_size_ = 128;
  std::size_t cursor_ = 0;
};

class TickSource : public Operator {
 public:
  void setup(const Bindings& b, const OperatorContext&) override {
    batch_size_ = std::max<std::int64_t>(1, int_binding(b, "batch-size"));
    interval_ms_ = std::max<std::int64_t>(0, int_binding(b, "interval-ms"));
    limit_ = std::max<std::int64_t>(0, int_binding(b, "limit"));
  }

  std::vector<TableFrame> process(std::span<const TableFrame>) override {
    TableFrame out(schema());
    std::int64_t n = limit_ > 0 ? limit_ : batch_size_;
    for (std::int64_t i = 0; i < n; ++i) out.mutable_rows().push_back({i, now_ms()});
    return {out};
  }

  std::optional<TableFrame> next_batch() override {
    if (exhausted()) return std::nullopt;
    auto now = std::chrono::steady_clock::now();
    if (emitted_ > 0 && now - last_ < std::chrono::milliseconds(interval_ms_)) return std::nullopt;
    last_ = now;
    TableFrame out(schema());
    for (std::int64_t i = 0; i < batch_size_ && !exhausted(); ++i) {
      out.mutable_rows().push_back({emitted_++, now_ms()});
    }
    return out;
  }

  bool exhausted() const override { return limit_ > 0 && emitted_ >= limit_; }

 private:
  static std::vector<Column> schema() { return {{"tick", DType::kInt}, {"ts_ms", DType::kInt}}; }

  std::int64_t batch_size_ = 1;
  std::int64_t interval_ms_ = 10;
  std::int64_t limit_ = 0;
  std::int64_t emitted_ = 0;
  std::chrono::steady_clock::time_point last_{};
};

// --- processors ---------------------------------------------------------------

class StringIndexerOp : public Operator {
 public:
  void setup(const Bindings& b, const OperatorContext& ctx) override {
    columns_ = split_list(str_binding(b, "columns"));
    if (columns_.empty()) throw Error(Errc::kInvalidArgument, "string-indexer needs columns");
    streaming_ = ctx.streaming;
  }

  std::vector<TableFrame> process(std::span<const TableFrame> inputs) override {
    TableFrame frame = single_input(inputs, "string-indexer");
    if (!streaming_) return {ops::string_indexer(frame, columns_)};
    if (frame.empty()) return {};
    // Streams fit the ranking on the first batch; later unseen labels take
    // the next free index in order of appearance.
    if (mappings_.empty()) {
      auto fitted = ops::string_indexer(frame, columns_);
      for (const auto& c : columns_) {
        auto idx = frame.column_index(c);
        std::vector<std::string> labels;
        for (const auto& row : frame.rows()) labels.push_back(std::get<std::string>(row[idx]));
        auto ranked = ops::rank_labels(labels);
        auto& m = mappings_[c];
        for (std::size_t i = 0; i < ranked.size(); ++i) m.emplace(ranked[i], static_cast<std::int64_t>(i));
      }
      return {fitted};
    }
    TableFrame out = frame;
    for (const auto& c : columns_) {
      auto idx = frame.column_index(c);
      if (frame.schema()[idx].dtype != DType::kString) {
        throw Error(Errc::kColumnTypeError, "column '" + c + "' is not a string column");
      }
      auto& m = mappings_[c];
      std::vector<Value> values;
      for (const auto& row : frame.rows()) {
        const auto& label = std::get<std::string>(row[idx]);
        auto [it, inserted] = m.emplace(label, static_cast<std::int64_t>(m.size()));
        values.emplace_back(it->second);
      }
      out.append_column({c + "_idx", DType::kInt}, std::move(values));
    }
    return {out};
  }

  Conservation conservation() const override { return Conservation::kOneToOne; }

 private:
  std::vector<std::string> columns_;
  bool streaming_ = false;
  std::map<std::string, std::map<std::string, std::int64_t>> mappings_;
};

class KMeansOp : public Operator {
 public:
  void setup(const Bindings& b, const OperatorContext& ctx) override {
    auto k = int_binding(b, "k");
    if (k < 1) throw Error(Errc::kInvalidArgument, "k must be at least 1");
    options_.k = static_cast<std::size_t>(k);
    options_.seed = static_cast<std::uint64_t>(int_binding(b, "seed"));
    options_.max_iter = static_cast<std::size_t>(std::max<std::int64_t>(0, int_binding(b, "max-iter")));
    options_.tol = float_binding(b, "tol");
    features_ = split_list(str_binding(b, "features"));
    streaming_ = ctx.streaming;
  }

  std::vector<TableFrame> process(std::span<const TableFrame> inputs) override {
    TableFrame frame = single_input(inputs, "kmeans");
    resolve_features(frame);
    if (!streaming_) return {ops::kmeans(frame, features_, options_).frame};
    if (frame.empty()) return {};
    if (centroids_) return {ops::assign_clusters(frame, *centroids_)};
    // Hold rows until enough distinct points exist to fit, then score with
    // the frozen centroids.
    if (pending_.num_columns() == 0) {
      pending_ = frame;
    } else {
      pending_.append(frame);
    }
    auto points = ops::feature_matrix(pending_, features_);
    std::set<std::vector<double>> distinct(points.begin(), points.end());
    if (distinct.size() < options_.k) return {};
    auto result = ops::kmeans(pending_, features_, options_);
    centroids_ = result.centroids;
    pending_ = TableFrame{};
    return {result.frame};
  }

  Conservation conservation() const override { return Conservation::kOneToOne; }

 private:
  void resolve_features(const TableFrame& frame) {
    if (!features_.empty()) return;
    for (const auto& c : frame.schema()) {
      if (c.name.size() > 4 && c.name.ends_with("_idx") && is_numeric(c.dtype)) {
        features_.push_back(c.name);
      }
    }
    if (!features_.empty()) return;
    for (const auto& c : frame.schema()) {
      if (is_numeric(c.dtype)) features_.push_back(c.name);
    }
  }

  ops::KMeansOptions options_;
  std::vector<std::string> features_;
  bool streaming_ = false;
  std::optional<ops::Centroids> centroids_;
  TableFrame pending_;
};

class ClusterSummaryOp : public Operator {
 public:
  void setup(const Bindings& b, const OperatorContext&) override {
    column_ = str_binding(b, "cluster-col");
  }
  std::vector<TableFrame> process(std::span<const TableFrame> inputs) override {
    return {ops::cluster_summary(single_input(inputs, "cluster-summary"), column_)};
  }

 private:
  std::string column_;
};

class FilterOp : public Operator {
 public:
  void setup(const Bindings& b, const OperatorContext&) override {
    column_ = str_binding(b, "column");
    op_ = str_binding(b, "op");
    literal_ = str_binding(b, "value");
  }

  std::vector<TableFrame> process(std::span<const TableFrame> inputs) override {
    TableFrame frame = single_input(inputs, "filter");
    auto idx = frame.column_index(column_);
    DType dtype = frame.schema()[idx].dtype;
    Value rhs = literal_;
    if (dtype != DType::kString) {
      ParamSpec spec;
      spec.dtype = dtype == DType::kInt     ? ParamType::kInt
                   : dtype == DType::kFloat ? ParamType::kFloat
                                            : ParamType::kBool;
      auto v = coerce_param(spec, literal_);
      if (!v) throw Error(Errc::kTypeError, "filter value does not match column dtype");
      rhs = *v;
    }
    TableFrame out(frame.schema());
    for (const auto& row : frame.rows()) {
      if (matches(row[idx], rhs)) out.mutable_rows().push_back(row);
    }
    return {out};
  }

  Conservation conservation() const override { return Conservation::kFiltering; }

 private:
  bool matches(const Value& lhs, const Value& rhs) const {
    if (op_ == "contains") {
      return value_to_string(lhs).find(value_to_string(rhs)) != std::string::npos;
    }
    int c = compare_values(lhs, rhs);
    if (op_ == "=") return c == 0;
    if (op_ == "!=") return c != 0;
    if (op_ == "<") return c < 0;
    if (op_ == "<=") return c <= 0;
    if (op_ == ">") return c > 0;
    return c >= 0;
  }

  std::string column_;
  std::string op_;
  std::string literal_;
};

// --- sinks --------------------------------------------------------------------

class TableSinkOp : public Operator {
 public:
  void setup(const Bindings& b, const OperatorContext& ctx) override {
    name_ = str_binding(b, "name");
    if (!TableStore::valid_name(name_)) throw Error(Errc::kInvalidArgument, "invalid table name");
    if (!ctx.tables) throw Error(Errc::kInvalidArgument, "table-sink needs a table store");
    tables_ = ctx.tables;
    streaming_ = ctx.streaming;
  }

  std::vector<TableFrame> process(std::span<const TableFrame> inputs) override {
    TableFrame frame = single_input(inputs, "table-sink");
    if (!streaming_) {
      tables_->write(name_, frame);
      return {frame};
    }
    if (!started_) {
      tables_->write(name_, frame);
      started_ = true;
    } else {
      tables_->append(name_, frame);
    }
    return {};
  }

 private:
  std::string name_;
  TableStore* tables_ = nullptr;
  bool streaming_ = false;
  bool started_ = false;
};

class LogSinkOp : public Operator {
 public:
  std::vector<TableFrame> process(std::span<const TableFrame> inputs) override {
    for (const auto& f : inputs) rows_ += f.num_rows();
    return {};
  }

 private:
  std::size_t rows_ = 0;
};

// --- tasks --------------------------------------------------------------------

class DerivativeWorkloadOp : public Operator {
 public:
  void setup(const Bindings& b, const OperatorContext& ctx) override {
    n_ = int_binding(b, "n");
    reps_ = int_binding(b, "reps");
    if (ctx.deployment_config) config_ = *ctx.deployment_config;
  }

  std::vector<TableFrame> process(std::span<const TableFrame>) override {
    if (n_ < 3) throw Error(Errc::kInvalidSize, "n must be at least 3");
    if (reps_ < 1) throw Error(Errc::kInvalidSize, "reps must be at least 1");
    auto config = config_ ? *config_ : opt::spark_like_space().default_point();
    auto r = ops::derivative_workload(static_cast<std::size_t>(n_), static_cast<std::size_t>(reps_), config);
    TableFrame out({{"duration_ms", DType::kFloat}, {"checksum", DType::kFloat}, {"workers", DType::kInt}});
    out.mutable_rows().push_back({r.duration_ms, r.checksum, static_cast<std::int64_t>(r.workers)});
    return {out};
  }

 private:
  std::int64_t n_ = 0;
  std::int64_t reps_ = 0;
  std::optional<opt::ConfigurationPoint> config_;
};

class SleepOp : public Operator {
 public:
  void setup(const Bindings& b, const OperatorContext&) override { ms_ = int_binding(b, "ms"); }
  std::vector<TableFrame> process(std::span<const TableFrame> inputs) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(ms_));
    if (inputs.empty()) return {TableFrame({{"slept_ms", DType::kInt}}, {{ms_}})};
    return {single_input(inputs, "sleep")};
  }

 private:
  std::int64_t ms_ = 0;
};

// --- descriptors ------------------------------------------------------------

ParamSpec required(std::string name, ParamType type, std::string doc) {
  return ParamSpec{std::move(name), type, {}, std::nullopt, true, std::move(doc)};
}

ParamSpec optional(std::string name, ParamType type, Value def, std::string doc,
                   std::vector<std::string> allowed = {}) {
  return ParamSpec{std::move(name), type, std::move(allowed), std::move(def), false, std::move(doc)};
}

ServiceDescriptor make(std::string name, ServiceKind kind, std::string impl, std::string description,
                       std::vector<ParamSpec> params, std::set<std::string> tags) {
  ServiceDescriptor d;
  d.name = std::move(name);
  d.version = "1.0.0";
  d.kind = kind;
  d.description = std::move(description);
  d.framework = "builtin";
  d.params = std::move(params);
  d.artifact_ref = "builtin:" + impl;
  d.tags = std::move(tags);
  return d;
}

std::vector<ParamSpec> csv_params() {
  return {required("path", ParamType::kString, "delimited file to read"),
          optional("delimiter", ParamType::kString, std::string(","), "field delimiter"),
          optional("header", ParamType::kBool, true, "first record holds column names"),
          optional("schema", ParamType::kString, std::string(""),
                   "comma-separated column specs name[:dtype]"),
          optional("on-bad-row", ParamType::kEnum, std::string("skip"), "bad row policy",
                   {"skip", "fail"}),
          optional("batch-size", ParamType::kInt, std::int64_t{128}, "rows per stream message")};
}

std::vector<ParamSpec> kmeans_params() {
  return {required("k", ParamType::kInt, "number of clusters"),
          optional("seed", ParamType::kInt, std::int64_t{0}, "k-means++ seed"),
          optional("max-iter", ParamType::kInt, std::int64_t{100}, "Lloyd iteration cap"),
          optional("tol", ParamType::kFloat, 1e-6, "centroid movement tolerance"),
          optional("features", ParamType::kString, std::string(""),
                   "feature columns; default *_idx columns, else all numeric")};
}

std::vector<ParamSpec> indexer_params() {
  return {required("columns", ParamType::kString, "comma-separated string columns to index")};
}

std::vector<ParamSpec> filter_params() {
  return {required("column", ParamType::kString, "column to test"),
          optional("op", ParamType::kEnum, std::string("="), "comparison",
                   {"=", "!=", "<", "<=", ">", ">=", "contains"}),
          required("value", ParamType::kString, "literal compared against")};
}

}  // namespace

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto item = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void OperatorRegistry::add(std::string impl, OperatorFactory factory) {
  factories_[std::move(impl)] = std::move(factory);
}

bool OperatorRegistry::contains(std::string_view impl) const { return factories_.count(impl) > 0; }

std::unique_ptr<Operator> OperatorRegistry::create(const ServiceDescriptor& d) const {
  constexpr std::string_view prefix = "builtin:";
  std::string_view ref = d.artifact_ref;
  if (ref.starts_with(prefix)) {
    auto it = factories_.find(ref.substr(prefix.size()));
    if (it != factories_.end()) return it->second();
  }
  throw Error(Errc::kOperatorInitError,
              "no in-process implementation for " + d.name + "@" + d.version + " (" + d.artifact_ref + ")",
              {{"service", d.name}, {"artifact_ref", d.artifact_ref}});
}

const OperatorRegistry& OperatorRegistry::builtins() {
  static const OperatorRegistry registry = [] {
    OperatorRegistry r;
    r.add("file-source", [] { return std::make_unique<FileSource>(); });
    r.add("tick-source", [] { return std::make_unique<TickSource>(); });
    r.add("string-indexer", [] { return std::make_unique<StringIndexerOp>(); });
    r.add("kmeans", [] { return std::make_unique<KMeansOp>(); });
    r.add("cluster-summary", [] { return std::make_unique<ClusterSummaryOp>(); });
    r.add("filter", [] { return std::make_unique<FilterOp>(); });
    r.add("table-sink", [] { return std::make_unique<TableSinkOp>(); });
    r.add("log-sink", [] { return std::make_unique<LogSinkOp>(); });
    r.add("derivative-workload", [] { return std::make_unique<DerivativeWorkloadOp>(); });
    r.add("sleep", [] { return std::make_unique<SleepOp>(); });
    return r;
  }();
  return registry;
}

std::vector<ServiceDescriptor> builtin_descriptors() {
  using K = ServiceKind;
  using P = ParamType;
  std::vector<ServiceDescriptor> out;
  out.push_back(make("file-source", K::kSource, "file-source", "Streams rows of a delimited file",
                     csv_params(), {"io"}));
  out.push_back(make("tick-source", K::kSource, "tick-source", "Emits a counter row every interval",
                     {optional("batch-size", P::kInt, std::int64_t{1}, "rows per tick"),
                      optional("interval-ms", P::kInt, std::int64_t{10}, "delay between ticks"),
                      optional("limit", P::kInt, std::int64_t{0}, "total rows, 0 for unbounded")},
                     {"io", "test"}));
  out.push_back(make("string-indexer", K::kProcessor, "string-indexer",
                     "Encodes string labels as frequency-ranked indices", indexer_params(),
                     {"feature"}));
  out.push_back(make("kmeans", K::kProcessor, "kmeans", "Clusters rows with k-means",
                     kmeans_params(), {"ml", "clustering"}));
  out.push_back(make("filter", K::kProcessor, "filter", "Keeps rows matching a comparison",
                     filter_params(), {"transform"}));
  out.push_back(make("table-sink", K::kSink, "table-sink", "Stores rows in the internal table store",
                     {required("name", P::kString, "table name")}, {"io"}));
  out.push_back(make("log-sink", K::kSink, "log-sink", "Counts and discards rows", {}, {"io", "test"}));

  out.push_back(make("load-csv", K::kTask, "file-source", "Loads a delimited file", csv_params(), {"io"}));
  out.push_back(make("index-strings", K::kTask, "string-indexer",
                     "Encodes string labels as frequency-ranked indices", indexer_params(),
                     {"feature"}));
  out.push_back(make("kmeans-train", K::kTask, "kmeans", "Clusters rows with k-means",
                     kmeans_params(), {"ml", "clustering"}));
  out.push_back(make("summarize-clusters", K::kTask, "cluster-summary",
                     "Per-cluster counts, shares and means",
                     {optional("cluster-col", P::kString, std::string("cluster"), "cluster id column")},
                     {"ml", "clustering"}));
  out.push_back(make("filter-rows", K::kTask, "filter", "Keeps rows matching a comparison",
                     filter_params(), {"transform"}));
  out.push_back(make("save-table", K::kTask, "table-sink", "Stores a frame in the internal table store",
                     {required("name", P::kString, "table name")}, {"io"}));
  out.push_back(make("derivative-workload", K::kTask, "derivative-workload",
                     "Central-difference derivatives over a sine series",
                     {optional("n", P::kInt, std::int64_t{1000000}, "series length"),
                      optional("reps", P::kInt, std::int64_t{10}, "passes over the series")},
                     {"workload:derivative"}));
  out.push_back(make("sleep", K::kTask, "sleep", "Waits, then passes its input through",
                     {optional("ms", P::kInt, std::int64_t{100}, "milliseconds to wait")},
                     {"test"}));
  return out;
}

}  // namespace flowforge
