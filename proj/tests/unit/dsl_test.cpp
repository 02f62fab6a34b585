#include <doctest.h>

#include <random>

#include "dsl_gen.hpp"
#include "flowforge/dsl.hpp"
#include "flowforge/operators/operator.hpp"
#include "support.hpp"

using namespace flowforge;
using fftest::error_of;

namespace {

const char* kFig3 =
    "file-source --path=r.csv | string-indexer --columns=sourceAirport,destinationAirport | kmeans --k=3 | "
    "table-sink --name=out";

std::vector<Edge> edges(std::initializer_list<std::pair<const char*, const char*>> list) {
  std::vector<Edge> out;
  for (auto [a, b] : list) out.push_back({a, b});
  return out;
}

Catalogue& builtin_catalogue() {
  static Catalogue c;
  static bool loaded = false;
  if (!loaded) {
    for (const auto& d : builtin_descriptors()) c.register_service(d);
    loaded = true;
  }
  return c;
}

}  // namespace

TEST_SUITE("dsl") {
  TEST_CASE("stream pipeline shape") {
    auto def = dsl::parse_stream(kFig3, "routes");
    REQUIRE(def.nodes.size() == 4);
    CHECK(def.edges == edges({{"n0", "n1"}, {"n1", "n2"}, {"n2", "n3"}}));
    CHECK(def.nodes[1].bindings.at("columns") == "sourceAirport,destinationAirport");
    CHECK(def.mode == WorkflowMode::kStream);
  }

  TEST_CASE("syntax errors carry positions") {
    try {
      dsl::parse_stream("a | ");
      FAIL("expected SyntaxError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kSyntaxError);
      CHECK(e.details().contains("line"));
      CHECK(e.details().contains("column"));
    }
    CHECK(error_of([] { dsl::parse_stream("single"); }) == Errc::kSyntaxError);
    CHECK(error_of([] { dsl::parse_stream("a --k=\"open | b"); }) == Errc::kSyntaxError);
    CHECK(error_of([] { dsl::parse_stream("a --k=1 --k=2 | b"); }) == Errc::kSyntaxError);
    CHECK(error_of([] { dsl::parse_task("<a || "); }) == Errc::kSyntaxError);
    CHECK(error_of([] { dsl::parse_task("<a>"); }) == Errc::kSyntaxError);
    CHECK(error_of([] { dsl::parse_task("a &&"); }) == Errc::kSyntaxError);
  }

  TEST_CASE("second line errors report line 2") {
    try {
      dsl::parse_stream("a --x=1 |\n  | b");
      FAIL("expected SyntaxError");
    } catch (const Error& e) {
      CHECK(e.details()["line"] == 2);
    }
  }

  TEST_CASE("quoted pipe is not a separator") {
    auto def = dsl::parse_stream("src --msg=\"a|b\" | sink");
    CHECK(def.nodes.size() == 2);
    CHECK(def.nodes[0].bindings.at("msg") == "a|b");
    auto esc = dsl::parse_stream(R"(src --msg="say \"hi\" \\ bye" | sink)");
    CHECK(esc.nodes[0].bindings.at("msg") == "say \"hi\" \\ bye");
  }

  TEST_CASE("task split edges") {
    auto def = dsl::parse_task("prep && <train-a || train-b> && merge");
    REQUIRE(def.nodes.size() == 4);
    CHECK(def.edges == edges({{"n0", "n1"}, {"n0", "n2"}, {"n1", "n3"}, {"n2", "n3"}}));
    CHECK(def.nodes[1].service == "train-a");
  }

  TEST_CASE("repeated services get distinct ids") {
    auto def = dsl::parse_task("a && a");
    CHECK(def.nodes[0].id == "n0");
    CHECK(def.nodes[1].id == "n1");
    CHECK(def.nodes[1].service == "a");
  }

  TEST_CASE("labels and versions") {
    auto def = dsl::parse_stream("src: file-source@1.2.0 --path=x | out: table-sink --name=t");
    CHECK(def.nodes[0].id == "src");
    CHECK(def.nodes[0].version == "1.2.0");
    CHECK(def.edges == edges({{"src", "out"}}));
    CHECK(error_of([] { dsl::parse_stream("x: a | x: b"); }) == Errc::kSyntaxError);
  }

  TEST_CASE("serialize quotes only when needed") {
    auto def = dsl::parse_stream("a --k=\"a b\" --j=plain | b");
    auto text = dsl::serialize(def);
    CHECK(text == "a --j=plain --k=\"a b\" | b");
    CHECK(dsl::quote_value("") == "\"\"");
    CHECK(dsl::quote_value("x,y") == "x,y");
  }

  TEST_CASE("serialize round-trip") {
    for (std::string text : {std::string(kFig3), std::string("x: a --p=\"q r\" | y: b")}) {
      auto def = dsl::parse_stream(text);
      CHECK(dsl::parse_stream(dsl::serialize(def)) == def);
    }
    auto task = dsl::parse_task("prep && <train-a || train-b> && merge");
    CHECK(dsl::serialize(task) == "prep && <train-a || train-b> && merge");
    CHECK(dsl::parse_task(dsl::serialize(task)) == task);
    auto nested = dsl::parse_task("a && <b && <c || d> || e> && f");
    CHECK(dsl::parse_task(dsl::serialize(nested)) == nested);
  }

  TEST_CASE("random definitions round-trip") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
      auto s = dsl::parse_stream(fftest::random_stream_text(rng));
      CHECK(dsl::parse_stream(dsl::serialize(s)) == s);
      auto t = dsl::parse_task(fftest::random_task_text(rng));
      CHECK(dsl::parse_task(dsl::serialize(t)) == t);
    }
  }

  TEST_CASE("non series-parallel graphs cannot be serialized") {
    WorkflowDefinition def;
    def.mode = WorkflowMode::kBatch;
    for (const char* id : {"a", "b", "c", "d"}) def.nodes.push_back({id, "t", std::nullopt, {}});
    def.edges = edges({{"a", "c"}, {"a", "d"}, {"b", "d"}});
    CHECK(error_of([&] { dsl::serialize(def); }) == Errc::kInvalidWorkflow);
  }

  TEST_CASE("cycles are rejected") {
    WorkflowDefinition def;
    def.mode = WorkflowMode::kBatch;
    for (const char* id : {"a", "b"}) def.nodes.push_back({id, "t", std::nullopt, {}});
    def.edges = edges({{"a", "b"}, {"b", "a"}});
    CHECK(error_of([&] { dsl::check_definition(def); }) == Errc::kInvalidWorkflow);
  }

  TEST_CASE("topological order breaks ties by position") {
    auto def = dsl::parse_task("<b || a> && c");
    CHECK(dsl::topological_order(def) == std::vector<std::string>{"n0", "n1", "n2"});
  }

  TEST_CASE("validate coerces and fills defaults") {
    auto vw = dsl::validate(dsl::parse_stream(kFig3), builtin_catalogue());
    CHECK(std::get<std::int64_t>(vw.bindings.at("n2").at("k")) == 3);
    CHECK(vw.resolved.at("n0").name == "file-source");
    CHECK(vw.bindings.at("n0").count("delimiter") == 1);
  }

  TEST_CASE("validate errors") {
    auto& c = builtin_catalogue();
    auto code = [&](const std::string& text, WorkflowMode mode) {
      return error_of([&] { dsl::validate(dsl::parse(text, mode), c); });
    };
    CHECK(code("file-source --path=x | kmeans --k=3", WorkflowMode::kStream) == Errc::kKindMismatch);
    CHECK(code("file-source --path=x | nosuch | table-sink --name=o", WorkflowMode::kStream) ==
          Errc::kUnknownService);
    CHECK(code("file-source --path=x | kmeans | table-sink --name=o", WorkflowMode::kStream) ==
          Errc::kMissingRequiredParam);
    CHECK(code("file-source --path=x | kmeans --k=three | table-sink --name=o", WorkflowMode::kStream) ==
          Errc::kBindingTypeError);
    CHECK(code("load-csv --path=x && kmeans --k=3", WorkflowMode::kBatch) == Errc::kKindMismatch);
    CHECK(code("file-source@9.9.9 --path=x | table-sink --name=o", WorkflowMode::kStream) ==
          Errc::kUnknownService);
    try {
      dsl::validate(dsl::parse_stream("file-source --path=x | kmeans --k=3"), c);
    } catch (const Error& e) {
      CHECK(e.details()["node"] == "n1");
      CHECK(e.details()["expected"] == "sink");
      CHECK(e.details()["actual"] == "processor");
    }
  }

  TEST_CASE("fuzzing never crashes") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
      std::string s(rng() % 40, '\0');
      for (auto& ch : s) ch = static_cast<char>(rng() % 256);
      for (auto mode : {WorkflowMode::kStream, WorkflowMode::kBatch}) {
        try {
          dsl::parse(s, mode);
        } catch (const Error& e) {
          CHECK((e.code() == Errc::kSyntaxError || e.code() == Errc::kInvalidWorkflow));
        }
      }
    }
  }

  TEST_CASE("deep nesting is bounded") {
    std::string deep;
    for (int i = 0; i < 5000; ++i) deep += "<a || ";
    CHECK(error_of([&] { dsl::parse_task(deep); }) == Errc::kSyntaxError);
  }

  TEST_CASE("definition json round-trip") {
    auto def = dsl::parse_task("x: prep --a=1 && <b || c@1.0.0>", "wf");
    CHECK(definition_from_json(definition_to_json(def)) == def);
  }
}
