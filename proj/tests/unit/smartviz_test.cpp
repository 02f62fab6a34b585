#include <doctest.h>

#include <fstream>
#include <sstream>

#include "flowforge/smartviz.hpp"
#include "query_oracle.hpp"
#include "support.hpp"

using namespace flowforge;
using namespace flowforge::viz;
using namespace std::chrono_literals;
using fftest::error_of;
using nlohmann::json;

namespace {

struct VizEnv {
  fftest::TempDir dir;
  TableStore store{dir / "tables"};
  Broker broker;
  SourceRegistry sources{store, broker, dir / "sources.json"};
};

TableFrame fig4_frame() {
  TableFrame f({{"sourceAirport_idx", DType::kInt}, {"destinationAirport_idx", DType::kInt}, {"cluster", DType::kInt}});
  for (std::int64_t i = 0; i < 300; ++i) f.append_row({i % 97, (i * 7) % 113, i % 3});
  return f;
}

std::vector<std::string> chart_types(const std::vector<ChartRecommendation>& recs) {
  std::vector<std::string> out;
  for (const auto& r : recs) out.push_back(r.chart_type);
  return out;
}

}  // namespace

TEST_SUITE("smartviz") {
  TEST_CASE("internal source discovery") {
    VizEnv env;
    CHECK(env.sources.tables("internal").empty());
    TableFrame f({{"a", DType::kInt}, {"cluster", DType::kInt}}, {{std::int64_t{1}, std::int64_t{0}}});
    env.store.write("clustered_routes", f);
    auto tables = env.sources.tables("internal");
    REQUIRE(tables.size() == 1);
    CHECK(tables[0].name == "clustered_routes");
    CHECK(tables[0].row_count == 1);
    CHECK(tables[0].columns[1] == Column{"cluster", DType::kInt});
    CHECK(env.sources.read("internal", "clustered_routes") == f);
    CHECK(error_of([&] { env.sources.read("internal", "nope"); }) == Errc::kNotFound);
    CHECK(error_of([&] { env.sources.read("internal", "../x"); }) == Errc::kNotFound);
    CHECK(error_of([&] { env.sources.tables("ghost"); }) == Errc::kNotFound);
  }

  TEST_CASE("file sources") {
    VizEnv env;
    DataSourceRef missing;
    missing.kind = SourceKind::kDelimitedFile;
    missing.location = (env.dir / "missing.csv").string();
    CHECK(error_of([&] { env.sources.add(missing); }) == Errc::kUnreachableSource);

    DataSourceRef csv;
    csv.kind = SourceKind::kDelimitedFile;
    csv.location = fftest::fixture("routes_10.csv").string();
    auto id = env.sources.add(csv);
    CHECK(id == "src-1");
    auto tables = env.sources.tables(id);
    REQUIRE(tables.size() == 1);
    CHECK(tables[0].name == "routes_10");
    CHECK(tables[0].row_count == 10);
    CHECK(tables[0].columns.size() == 9);
    CHECK(error_of([&] { env.sources.read(id, "other"); }) == Errc::kNotFound);

    {
      std::ofstream out(env.dir / "events.jsonl");
      out << R"({"user":"a","n":1,"x":0.5})" << "\n" << R"({"user":"b","n":2,"x":1})" << "\n";
    }
    DataSourceRef jsonl;
    jsonl.id = "ev";
    jsonl.kind = SourceKind::kJsonlFile;
    jsonl.location = (env.dir / "events.jsonl").string();
    CHECK(env.sources.add(jsonl) == "ev");
    CHECK(error_of([&] { env.sources.add(jsonl); }) == Errc::kInvalidArgument);
    auto f = env.sources.read("ev", "events");
    CHECK(f.schema() == std::vector<Column>{{"user", DType::kString}, {"n", DType::kInt}, {"x", DType::kFloat}});
    std::filesystem::remove(env.dir / "events.jsonl");
    CHECK(error_of([&] { env.sources.read("ev", "events"); }) == Errc::kUnreachableSource);

    CHECK(error_of([] { parse_source_kind("cassandra"); }) == Errc::kUnsupportedKind);
    CHECK(env.sources.list().size() == 3);
    SourceRegistry reloaded(env.store, env.broker, env.dir / "sources.json");
    CHECK(reloaded.list().size() == 3);
    DataSourceRef next = csv;
    CHECK(reloaded.add(next) == "src-2");
  }

  TEST_CASE("jsonl parsing") {
    auto f = parse_jsonl("{\"a\":true,\"b\":\"x\"}\n\n{\"a\":false,\"b\":\"y\"}\n");
    CHECK(f.num_rows() == 2);
    CHECK(f.schema()[0].dtype == DType::kBool);
    CHECK(error_of([] { parse_jsonl("{\"a\":1}\n{\"b\":2}\n"); }) == Errc::kSchemaMismatch);
    CHECK(error_of([] { parse_jsonl("not json\n"); }) == Errc::kSchemaMismatch);
    auto env = encode_frame(TableFrame({{"q", DType::kInt}}, {{std::int64_t{3}}}));
    CHECK(parse_jsonl(env + "\n" + env + "\n").num_rows() == 2);
  }

  TEST_CASE("filter matches a hand count on the routes fixture") {
    VizEnv env;
    DataSourceRef csv;
    csv.id = "routes";
    csv.kind = SourceKind::kDelimitedFile;
    csv.location = fftest::fixture("routes_5000.csv").string();
    env.sources.add(csv);

    std::ifstream in(csv.location);
    std::string line;
    std::getline(in, line);
    std::map<std::string, std::int64_t> counts;
    while (std::getline(in, line)) ++counts[line.substr(0, line.find(','))];
    auto airline = counts.begin()->first;

    QuerySpec q;
    q.table = "routes_5000";
    q.filters.push_back({"airline", "=", airline});
    auto out = run_query(env.sources.read("routes", "routes_5000"), q);
    CHECK(static_cast<std::int64_t>(out.num_rows()) == counts[airline]);
    for (const auto& row : out.rows()) CHECK(std::get<std::string>(row[0]) == airline);

    QuerySpec g;
    g.group_by = {"airline"};
    g.aggregates = {{"count", std::nullopt}};
    auto grouped = run_query(env.sources.read("routes", "routes_5000"), g);
    CHECK(grouped.num_rows() == counts.size());
    std::int64_t total = 0;
    for (const auto& row : grouped.rows()) {
      CHECK(std::get<std::int64_t>(row[1]) == counts[std::get<std::string>(row[0])]);
      total += std::get<std::int64_t>(row[1]);
    }
    CHECK(total == 5000);
  }

  TEST_CASE("query semantics") {
    TableFrame f({{"k", DType::kString}, {"v", DType::kInt}, {"w", DType::kFloat}},
                 {{std::string("b"), std::int64_t{2}, 1.5},
                  {std::string("a"), std::int64_t{5}, 0.5},
                  {std::string("b"), std::int64_t{-1}, 2.0}});
    QuerySpec lim;
    lim.limit = 0;
    auto empty = run_query(f, lim);
    CHECK(empty.num_rows() == 0);
    CHECK(empty.schema() == f.schema());

    QuerySpec g;
    g.group_by = {"k"};
    g.aggregates = {{"sum", "v"}, {"avg", "w"}, {"max", "k"}};
    auto out = run_query(f, g);
    REQUIRE(out.num_rows() == 2);
    CHECK(std::get<std::string>(out.rows()[0][0]) == "a");
    CHECK(std::get<std::int64_t>(out.rows()[1][1]) == 1);
    CHECK(std::get<double>(out.rows()[1][2]) == doctest::Approx(1.75));
    CHECK(out.schema()[1] == Column{"sum_v", DType::kInt});

    QuerySpec all;
    all.aggregates = {{"count", std::nullopt}};
    CHECK(run_query(f, all).rows()[0][0] == Value(std::int64_t{3}));
    all.filters = {{"v", ">", 100}};
    CHECK(run_query(f, all).num_rows() == 0);

    QuerySpec text;
    text.filters = {{"v", ">=", "2"}};
    CHECK(run_query(f, text).num_rows() == 2);

    QuerySpec bad;
    bad.filters = {{"zz", "=", 1}};
    CHECK(error_of([&] { run_query(f, bad); }) == Errc::kUnknownColumn);
    bad.filters = {{"v", "=", "abc"}};
    CHECK(error_of([&] { run_query(f, bad); }) == Errc::kTypeError);
    bad.filters = {{"v", "contains", 3}};
    CHECK(error_of([&] { run_query(f, bad); }) == Errc::kTypeError);
    bad.filters.clear();
    bad.aggregates = {{"avg", "k"}};
    CHECK(error_of([&] { run_query(f, bad); }) == Errc::kTypeError);
    bad.aggregates.clear();
    bad.select = {"nope"};
    CHECK(error_of([&] { run_query(f, bad); }) == Errc::kUnknownColumn);

    CHECK(error_of([] { query_from_json(json{{"table", "t"}, {"filters", {{{"column", "a"}, {"op", "~"}, {"literal", 1}}}}}); }) ==
          Errc::kInvalidArgument);
    CHECK(error_of([] { query_from_json(json::array()); }) == Errc::kInvalidArgument);
    CHECK(error_of([] { query_from_json(json{{"table", "t"}, {"limit", -1}}); }) == Errc::kInvalidArgument);
    auto round = query_from_json(query_to_json(g));
    CHECK(query_to_json(round) == query_to_json(g));
  }

  TEST_CASE("queries agree with the naive evaluator") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 100; ++i) {
      auto frame = oracle::random_frame(rng, rng() % 200);
      auto q = oracle::random_query(rng);
      INFO(query_to_json(q).dump());
      CHECK(oracle::frames_match(run_query(frame, q), oracle::evaluate(frame, q)));
    }
  }

  TEST_CASE("recommendation rules") {
    auto recs = recommend_charts(fig4_frame());
    REQUIRE_FALSE(recs.empty());
    CHECK(recs[0].chart_type == "scatter");
    CHECK(recs[0].encoding.at("x") == "sourceAirport_idx");
    CHECK(recs[0].encoding.at("y") == "destinationAirport_idx");
    CHECK(recs[0].encoding.at("color") == "cluster");
    CHECK(recs[0].score == 0.95);
    for (std::size_t i = 1; i < recs.size(); ++i) CHECK(recs[i - 1].score >= recs[i].score);

    TableFrame one({{"x", DType::kFloat}}, {{1.0}, {2.5}});
    CHECK(chart_types(recommend_charts(one)) == std::vector<std::string>{"histogram"});

    TableFrame tree({{"id", DType::kString}, {"parentId", DType::kString}},
                    {{std::string("a"), std::string("")}, {std::string("b"), std::string("a")}});
    CHECK(chart_types(recommend_charts(tree)) == std::vector<std::string>{"dendrogram"});

    TableFrame series({{"ts", DType::kString}, {"load", DType::kFloat}, {"host", DType::kString}},
                      {{std::string("t1"), 1.0, std::string("a")}, {std::string("t2"), 2.0, std::string("b")}});
    CHECK(chart_types(recommend_charts(series)) == std::vector<std::string>{"line", "bar", "histogram", "pie"});

    TableFrame plain({{"x", DType::kFloat}, {"y", DType::kFloat}}, {{1.0, 2.0}});
    auto scatter = recommend_charts(plain);
    CHECK(scatter[0].score == 0.9);
    CHECK_FALSE(scatter[0].encoding.count("color"));

    CHECK(error_of([] { recommend_charts(TableFrame({{"x", DType::kInt}})); }) == Errc::kEmptyFrame);
    CHECK(is_time_column("created_at"));
    CHECK_FALSE(is_time_column("_at"));
    CHECK_FALSE(is_time_column("format"));
  }

  TEST_CASE("recommendation depends only on the statistics") {
    auto a = fig4_frame();
    auto b = a;
    std::reverse(b.mutable_rows().begin(), b.mutable_rows().end());
    auto ra = recommend_charts(a);
    auto rb = recommend_charts(b);
    REQUIRE(ra.size() == rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) CHECK(recommendation_to_json(ra[i]) == recommendation_to_json(rb[i]));
    auto stats = frame_stats(a);
    CHECK(stats.columns[2].distinct == 3);
    CHECK(stats.row_count == 300);
  }

  TEST_CASE("refresh on a static source repeats the same frame") {
    VizEnv env;
    env.store.write("t", fig4_frame());
    QuerySpec q;
    q.table = "t";
    q.group_by = {"cluster"};
    q.aggregates = {{"count", std::nullopt}};
    CHECK(error_of([&] { stream_refresh(env.sources, q, 99ms, [](const TableFrame&) {}); }) == Errc::kInvalidArgument);
    std::mutex m;
    std::vector<TableFrame> frames;
    auto handle = stream_refresh(env.sources, q, 100ms, [&](const TableFrame& f) {
      std::lock_guard lock(m);
      frames.push_back(f);
    });
    CHECK(fftest::eventually([&] { return handle->emissions() >= 3; }, 5s));
    handle->cancel();
    auto count = handle->emissions();
    std::this_thread::sleep_for(250ms);
    CHECK(handle->emissions() == count);
    std::lock_guard lock(m);
    for (const auto& f : frames) CHECK(f == frames.front());
  }

  TEST_CASE("refresh reports errors and keeps running") {
    VizEnv env;
    QuerySpec q;
    q.table = "missing";
    std::atomic<int> errors{0};
    auto handle = stream_refresh(
        env.sources, q, 100ms, [](const TableFrame&) {}, [&](const Error&) { ++errors; });
    CHECK(fftest::eventually([&] { return errors >= 2; }, 5s));
    handle->cancel();
  }

  TEST_CASE("stream-topic window grows up to its size") {
    VizEnv env;
    DataSourceRef topic;
    topic.id = "live";
    topic.kind = SourceKind::kStreamTopic;
    topic.location = "events";
    topic.window = 50;
    env.sources.add(topic);
    CHECK(env.sources.tables("live").empty());

    TableFrame batch({{"n", DType::kInt}});
    for (std::int64_t i = 0; i < 20; ++i) batch.append_row({i});
    QuerySpec q;
    q.source_id = "live";
    q.table = "events";
    std::vector<std::size_t> sizes;
    for (int tick = 0; tick < 5; ++tick) {
      env.broker.publish("events", encode_frame(batch));
      sizes.push_back(run_query(env.sources.read("live", "events"), q).num_rows());
    }
    CHECK(sizes == std::vector<std::size_t>{20, 40, 50, 50, 50});
    CHECK(env.sources.tables("live")[0].row_count == 50);
  }
}
