#include <algorithm>
#include <fstream>
#include <set>

#include "flowforge/csv.hpp"
#include "flowforge/smartviz.hpp"

namespace flowforge::viz {

using nlohmann::json;

std::string_view source_kind_name(SourceKind kind) {
  switch (kind) {
    case SourceKind::kInternal: return "internal";
    case SourceKind::kDelimitedFile: return "delimited-file";
    case SourceKind::kJsonlFile: return "jsonl-file";
    case SourceKind::kStreamTopic: return "stream-topic";
  }
  return "internal";
}

SourceKind parse_source_kind(std::string_view name) {
  for (auto k : {SourceKind::kInternal, SourceKind::kDelimitedFile, SourceKind::kJsonlFile,
                 SourceKind::kStreamTopic}) {
    if (source_kind_name(k) == name) return k;
  }
  throw Error(Errc::kUnsupportedKind, "unsupported source kind '" + std::string(name) + "'",
              {{"kind", name}});
}

json source_to_json(const DataSourceRef& ref) {
  return {{"id", ref.id},
          {"kind", source_kind_name(ref.kind)},
          {"location", ref.location},
          {"options", {{"delimiter", std::string(1, ref.delimiter)}, {"header", ref.header}, {"window", ref.window}}}};
}

DataSourceRef source_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::kInvalidArgument, "source must be an object");
  DataSourceRef ref;
  try {
    ref.id = j.value("id", std::string());
    ref.kind = parse_source_kind(j.at("kind").get<std::string>());
    ref.location = j.value("location", std::string());
    auto options = j.value("options", json::object());
    auto delimiter = options.value("delimiter", std::string(","));
    if (delimiter == "\\t" || delimiter == "tab") delimiter = "\t";
    if (delimiter.size() != 1) throw Error(Errc::kInvalidArgument, "delimiter must be one character");
    ref.delimiter = delimiter.front();
    ref.header = options.value("header", true);
    ref.window = options.value("window", std::size_t{1000});
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("malformed source: ") + e.what());
  }
  if (ref.window == 0) throw Error(Errc::kInvalidArgument, "window must be positive");
  return ref;
}

json table_info_to_json(const TableInfo& info) {
  return {{"name", info.name}, {"columns", schema_to_json(info.columns)}, {"row_count", info.row_count}};
}

TableFrame parse_jsonl(std::string_view text) {
  std::vector<json> lines;
  std::vector<std::string_view> raw;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      lines.push_back(json::parse(line));
      raw.push_back(line);
    } catch (const json::exception&) {
      throw Error(Errc::kSchemaMismatch, "line " + std::to_string(line_no) + " is not JSON",
                  {{"line", line_no}});
    }
    if (!lines.back().is_object()) {
      throw Error(Errc::kSchemaMismatch, "line " + std::to_string(line_no) + " is not an object",
                  {{"line", line_no}});
    }
  }
  if (lines.empty()) return {};
  if (lines.front().contains("schema") && lines.front().contains("rows")) {
    std::vector<TableFrame> frames;
    for (const auto& l : lines) frames.push_back(frame_from_json(l));
    return concat_frames(frames);
  }

  std::vector<std::string> names;
  std::set<std::string> seen;
  // Columns appear in first-seen key order.
  for (auto line : raw) {
    auto record = nlohmann::ordered_json::parse(line);
    for (const auto& [k, v] : record.items()) {
      if (seen.insert(k).second) names.push_back(k);
    }
  }
  std::vector<Column> schema;
  for (const auto& name : names) {
    bool all_bool = true, all_int = true, all_number = true;
    for (const auto& l : lines) {
      auto it = l.find(name);
      if (it == l.end()) continue;
      all_bool = all_bool && it->is_boolean();
      all_int = all_int && it->is_number_integer();
      all_number = all_number && it->is_number();
    }
    DType dtype = all_bool ? DType::kBool : all_int ? DType::kInt : all_number ? DType::kFloat : DType::kString;
    schema.push_back({name, dtype});
  }
  TableFrame frame(schema);
  for (std::size_t r = 0; r < lines.size(); ++r) {
    Row row;
    for (const auto& c : schema) {
      auto it = lines[r].find(c.name);
      if (it == lines[r].end() || it->is_null()) {
        throw Error(Errc::kSchemaMismatch, "record " + std::to_string(r + 1) + " lacks '" + c.name + "'");
      }
      if (c.dtype == DType::kString) {
        row.emplace_back(it->is_string() ? it->get<std::string>() : it->dump());
      } else {
        row.push_back(value_from_json(*it, c.dtype));
      }
    }
    frame.append_row(std::move(row));
  }
  return frame;
}

namespace {

TableInfo info_of(const std::string& name, const TableFrame& frame) {
  return {name, frame.schema(), frame.num_rows()};
}

void require_table(const std::string& expected, const std::string& table) {
  if (table != expected) throw Error(Errc::kNotFound, "table not found: " + table, {{"table", table}});
}

class InternalConnector : public Connector {
 public:
  explicit InternalConnector(TableStore& store) : store_(store) {}

  std::vector<TableInfo> tables() override {
    std::vector<TableInfo> out;
    for (const auto& name : store_.list()) {
      try {
        out.push_back(info_of(name, store_.read(name)));
      } catch (const Error&) {
        // Tables being rewritten concurrently are skipped for this listing.
      }
    }
    return out;
  }

  TableFrame read(const std::string& table) override {
    if (!TableStore::valid_name(table)) throw Error(Errc::kNotFound, "table not found: " + table);
    return store_.read(table);
  }

 private:
  TableStore& store_;
};

class DelimitedFileConnector : public Connector {
 public:
  explicit DelimitedFileConnector(const DataSourceRef& ref) : ref_(ref) {}

  std::vector<TableInfo> tables() override {
    return {info_of(name(), load())};
  }

  TableFrame read(const std::string& table) override {
    require_table(name(), table);
    return load();
  }

 private:
  std::string name() const { return std::filesystem::path(ref_.location).stem().string(); }

  TableFrame load() const {
    if (!std::filesystem::is_regular_file(ref_.location)) {
      throw Error(Errc::kUnreachableSource, "cannot read " + ref_.location, {{"location", ref_.location}});
    }
    CsvOptions options;
    options.delimiter = ref_.delimiter;
    options.header = ref_.header;
    options.infer_sample_rows = 1000;
    return read_csv(ref_.location, options).frame;
  }

  DataSourceRef ref_;
};

class JsonlFileConnector : public Connector {
 public:
  explicit JsonlFileConnector(const DataSourceRef& ref) : ref_(ref) {}

  std::vector<TableInfo> tables() override { return {info_of(name(), load())}; }

  TableFrame read(const std::string& table) override {
    require_table(name(), table);
    return load();
  }

 private:
  std::string name() const { return std::filesystem::path(ref_.location).stem().string(); }

  TableFrame load() const {
    if (!std::filesystem::is_regular_file(ref_.location)) {
      throw Error(Errc::kUnreachableSource, "cannot read " + ref_.location, {{"location", ref_.location}});
    }
    return parse_jsonl(read_file(ref_.location));
  }

  DataSourceRef ref_;
};

// Folds the topic's frames into a window of the most recent rows.
class StreamTopicConnector : public Connector {
 public:
  StreamTopicConnector(const DataSourceRef& ref, Broker& broker) : ref_(ref), broker_(broker) {}

  std::vector<TableInfo> tables() override {
    auto last = broker_.last_message(ref_.location);
    if (!last) return {};
    auto frame = decode_frame(last->payload);
    std::lock_guard lock(mutex_);
    fold();
    return {{ref_.location, frame.schema(), window_.num_rows()}};
  }

  TableFrame read(const std::string& table) override {
    require_table(ref_.location, table);
    std::lock_guard lock(mutex_);
    fold();
    return window_;
  }

 private:
  void fold() {
    if (!sub_) sub_.emplace(broker_.subscribe(ref_.location, "viz." + ref_.id));
    for (;;) {
      auto batch = broker_.poll(*sub_, 256, std::chrono::milliseconds(0));
      if (batch.empty()) break;
      for (const auto& m : batch) {
        auto frame = decode_frame(m.payload);
        if (window_.num_columns() == 0 || window_.schema() != frame.schema()) {
          window_ = TableFrame(frame.schema());
        }
        window_.append(frame);
      }
      broker_.commit(*sub_, batch.back().offset);
    }
    auto& rows = window_.mutable_rows();
    if (rows.size() > ref_.window) {
      rows.erase(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(rows.size() - ref_.window));
    }
  }

  DataSourceRef ref_;
  Broker& broker_;
  std::mutex mutex_;
  std::optional<Subscription> sub_;
  TableFrame window_;
};

}  // namespace

std::unique_ptr<Connector> make_connector(const DataSourceRef& ref, TableStore& store, Broker& broker) {
  switch (ref.kind) {
    case SourceKind::kInternal: return std::make_unique<InternalConnector>(store);
    case SourceKind::kDelimitedFile: return std::make_unique<DelimitedFileConnector>(ref);
    case SourceKind::kJsonlFile: return std::make_unique<JsonlFileConnector>(ref);
    case SourceKind::kStreamTopic: return std::make_unique<StreamTopicConnector>(ref, broker);
  }
  throw Error(Errc::kUnsupportedKind, "unsupported source kind");
}

SourceRegistry::SourceRegistry(TableStore& store, Broker& broker, std::filesystem::path persist_path)
    : store_(store), broker_(broker), persist_path_(std::move(persist_path)) {
  DataSourceRef internal;
  internal.id = "internal";
  internal.location = store.dir().string();
  refs_.push_back(internal);
  connectors_["internal"] = make_connector(internal, store_, broker_);
  if (persist_path_.empty() || !std::filesystem::exists(persist_path_)) return;
  try {
    std::ifstream in(persist_path_);
    auto stored = json::parse(in);
    for (const auto& j : stored.at("sources")) {
      auto ref = source_from_json(j);
      if (ref.id == "internal" || connectors_.count(ref.id)) continue;
      connectors_[ref.id] = make_connector(ref, store_, broker_);
      refs_.push_back(ref);
      if (ref.id.rfind("src-", 0) == 0) {
        try {
          next_id_ = std::max(next_id_, std::stoul(ref.id.substr(4)) + 1);
        } catch (const std::exception&) {
        }
      }
    }
  } catch (const std::exception&) {
    // A corrupt sources file leaves only the internal source.
  }
}

void SourceRegistry::save() const {
  if (persist_path_.empty()) return;
  json sources = json::array();
  for (const auto& r : refs_) {
    if (r.id != "internal") sources.push_back(source_to_json(r));
  }
  if (persist_path_.has_parent_path()) std::filesystem::create_directories(persist_path_.parent_path());
  auto tmp = persist_path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << json{{"sources", sources}}.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, persist_path_);
}

std::string SourceRegistry::add(DataSourceRef ref) {
  if (ref.kind == SourceKind::kInternal) {
    throw Error(Errc::kUnsupportedKind, "the internal source is built in");
  }
  if (ref.kind == SourceKind::kDelimitedFile || ref.kind == SourceKind::kJsonlFile) {
    std::error_code ec;
    if (ref.location.empty() || !std::filesystem::is_regular_file(ref.location, ec)) {
      throw Error(Errc::kUnreachableSource, "cannot reach '" + ref.location + "'", {{"location", ref.location}});
    }
    std::ifstream probe(ref.location);
    if (!probe) throw Error(Errc::kUnreachableSource, "cannot open '" + ref.location + "'", {{"location", ref.location}});
  }
  if (ref.kind == SourceKind::kStreamTopic && ref.location.empty()) {
    throw Error(Errc::kUnreachableSource, "stream-topic sources need a topic name");
  }
  std::lock_guard lock(mutex_);
  if (ref.id.empty()) {
    do {
      ref.id = "src-" + std::to_string(next_id_++);
    } while (connectors_.count(ref.id));
  } else if (connectors_.count(ref.id)) {
    throw Error(Errc::kInvalidArgument, "source id '" + ref.id + "' is taken", {{"id", ref.id}});
  }
  connectors_[ref.id] = make_connector(ref, store_, broker_);
  refs_.push_back(ref);
  save();
  return ref.id;
}

std::vector<DataSourceRef> SourceRegistry::list() const {
  std::lock_guard lock(mutex_);
  return refs_;
}

std::shared_ptr<Connector> SourceRegistry::connector(const std::string& source_id) const {
  std::lock_guard lock(mutex_);
  auto it = connectors_.find(source_id);
  if (it == connectors_.end()) {
    throw Error(Errc::kNotFound, "source not found: " + source_id, {{"source_id", source_id}});
  }
  return it->second;
}

std::vector<TableInfo> SourceRegistry::tables(const std::string& source_id) {
  return connector(source_id)->tables();
}

TableFrame SourceRegistry::read(const std::string& source_id, const std::string& table) {
  return connector(source_id)->read(table);
}

}  // namespace flowforge::viz
