#include <doctest.h>

#include <fstream>

#include "flowforge/csv.hpp"
#include "flowforge/frame.hpp"
#include "flowforge/semver.hpp"
#include "support.hpp"

using namespace flowforge;
using fftest::error_of;

TEST_SUITE("frame") {
  TEST_CASE("append_row checks arity and dtypes") {
    TableFrame f({{"a", DType::kString}, {"b", DType::kInt}});
    f.append_row({std::string("x"), std::int64_t{1}});
    CHECK(f.num_rows() == 1);
    CHECK(error_of([&] { f.append_row({std::string("x")}); }) == Errc::kSchemaMismatch);
    CHECK(error_of([&] { f.append_row({std::string("x"), 1.5}); }) == Errc::kSchemaMismatch);
    CHECK(f.num_rows() == 1);
  }

  TEST_CASE("column lookup") {
    TableFrame f({{"a", DType::kString}, {"b", DType::kInt}});
    CHECK(f.column_index("b") == 1);
    CHECK_FALSE(f.find_column("c").has_value());
    CHECK(error_of([&] { f.column_index("c"); }) == Errc::kColumnNotFound);
  }

  TEST_CASE("append_column rejects duplicates and length mismatch") {
    TableFrame f({{"a", DType::kInt}}, {{std::int64_t{1}}, {std::int64_t{2}}});
    f.append_column({"b", DType::kBool}, {true, false});
    CHECK(f.num_columns() == 2);
    CHECK(error_of([&] { f.append_column({"b", DType::kInt}, {std::int64_t{0}, std::int64_t{0}}); }) ==
          Errc::kSchemaMismatch);
    CHECK(error_of([&] { f.append_column({"c", DType::kInt}, {std::int64_t{0}}); }).has_value());
  }

  TEST_CASE("envelope round-trip keeps dtypes") {
    TableFrame f({{"s", DType::kString}, {"i", DType::kInt}, {"f", DType::kFloat}, {"b", DType::kBool}});
    f.append_row({std::string("q\"uote"), std::int64_t{-7}, 2.0, true});
    f.append_row({std::string(""), std::int64_t{1} << 40, 0.1, false});
    auto text = encode_frame(f);
    auto back = decode_frame(text);
    CHECK(back == f);
    CHECK(std::holds_alternative<double>(back.rows()[0][2]));
    auto j = nlohmann::json::parse(text);
    CHECK(j["schema"][1]["dtype"] == "int");
    CHECK(j["rows"][0][1] == -7);
  }

  TEST_CASE("decode rejects malformed envelopes") {
    CHECK(error_of([] { decode_frame("{}"); }) == Errc::kSchemaMismatch);
    CHECK(error_of([] { decode_frame(R"({"schema":[{"name":"a","dtype":"int"}],"rows":[["x"]]})"); }) ==
          Errc::kSchemaMismatch);
    CHECK(error_of([] { decode_frame("not json"); }).has_value());
  }

  TEST_CASE("concat requires one schema") {
    TableFrame a({{"x", DType::kInt}}, {{std::int64_t{1}}});
    TableFrame b({{"x", DType::kInt}}, {{std::int64_t{2}}});
    TableFrame c({{"y", DType::kInt}}, {{std::int64_t{3}}});
    std::vector<TableFrame> ok{a, b};
    CHECK(concat_frames(ok).num_rows() == 2);
    std::vector<TableFrame> bad{a, c};
    CHECK(error_of([&] { concat_frames(bad); }) == Errc::kSchemaMismatch);
  }

  TEST_CASE("value ordering") {
    CHECK(compare_values(std::int64_t{1}, std::int64_t{2}) < 0);
    CHECK(compare_values(std::string("b"), std::string("a")) > 0);
    CHECK(compare_values(2.5, 2.5) == 0);
    CHECK(compare_values(false, true) < 0);
  }
}

TEST_SUITE("csv") {
  TEST_CASE("routes line has nine columns and int stops") {
    std::string text =
        "airline,airlineId,sourceAirport,sourceAirportId,destinationAirport,destinationAirportId,codeshare,stops,"
        "equipment\nBA,1355,SIN,3316,LHR,507,,0,744\n";
    auto r = parse_csv(text, {});
    REQUIRE(r.frame.num_columns() == 9);
    CHECK(r.frame.num_rows() == 1);
    auto stops = r.frame.column_index("stops");
    CHECK(r.frame.schema()[stops].dtype == DType::kInt);
    CHECK(std::get<std::int64_t>(r.frame.rows()[0][stops]) == 0);
    CHECK(r.frame.schema()[r.frame.column_index("codeshare")].dtype == DType::kString);
  }

  TEST_CASE("header only gives an empty frame with schema") {
    auto r = parse_csv("a,b,c\n", {});
    CHECK(r.frame.num_columns() == 3);
    CHECK(r.frame.num_rows() == 0);
  }

  TEST_CASE("ragged and null rows are skipped and counted") {
    auto r = parse_csv("a,b\n1,2\n3\n\\N,4\n5,6\n", {});
    CHECK(r.frame.num_rows() == 2);
    CHECK(r.skipped_rows == 2);
    CHECK(r.frame.schema()[0].dtype == DType::kInt);
  }

  TEST_CASE("fail policy raises") {
    CsvOptions o;
    o.on_bad_row = BadRowPolicy::kFail;
    CHECK(error_of([&] { parse_csv("a,b\n1\n", o); }) == Errc::kSchemaMismatch);
  }

  TEST_CASE("promotion int < float < string") {
    auto r = parse_csv("a,b,c\n1,1,1\n2,2.5,x\n", {});
    CHECK(r.frame.schema()[0].dtype == DType::kInt);
    CHECK(r.frame.schema()[1].dtype == DType::kFloat);
    CHECK(r.frame.schema()[2].dtype == DType::kString);
    CHECK(std::get<double>(r.frame.rows()[0][1]) == 1.0);
    CHECK(std::get<std::string>(r.frame.rows()[0][2]) == "1");
  }

  TEST_CASE("quoted fields") {
    auto recs = split_csv_records("a,\"b,c\",\"d\"\"e\"\n\"multi\nline\",x\n", ',');
    REQUIRE(recs.size() == 2);
    CHECK(recs[0] == std::vector<std::string>{"a", "b,c", "d\"e"});
    CHECK(recs[1] == std::vector<std::string>{"multi\nline", "x"});
  }

  TEST_CASE("explicit schema overrides header and inference") {
    CsvOptions o;
    o.schema = {"x:string", "y"};
    auto r = parse_csv("a,b\n1,2\n", o);
    CHECK(r.frame.schema()[0] == Column{"x", DType::kString});
    CHECK(r.frame.schema()[1] == Column{"y", DType::kInt});
  }

  TEST_CASE("missing file is an io error") {
    CHECK(error_of([] { read_csv("/nonexistent/file.csv", {}); }) == Errc::kIoError);
  }

  TEST_CASE("tab delimiter without header") {
    CsvOptions o;
    o.delimiter = '\t';
    o.header = false;
    auto r = parse_csv("1\tx\n2\ty\n", o);
    CHECK(r.frame.num_rows() == 2);
    CHECK(r.frame.num_columns() == 2);
  }
}

TEST_SUITE("semver") {
  TEST_CASE("precedence") {
    CHECK(compare_versions("1.2.0", "1.10.0") < 0);
    CHECK(compare_versions("1.0.0-alpha", "1.0.0") < 0);
    CHECK(compare_versions("1.0.0-alpha.1", "1.0.0-alpha.beta") < 0);
    CHECK(compare_versions("1.0.0-2", "1.0.0-10") < 0);
    CHECK(compare_versions("1.0.0+a", "1.0.0+b") == 0);
    CHECK_FALSE(SemVer::parse("1.0").has_value());
    CHECK_FALSE(SemVer::parse("01.0.0").has_value());
  }

  TEST_CASE("chain from the semver ordering example") {
    std::vector<std::string> chain{"1.0.0-alpha", "1.0.0-alpha.1", "1.0.0-alpha.beta", "1.0.0-beta",
                                   "1.0.0-beta.2", "1.0.0-beta.11", "1.0.0-rc.1", "1.0.0"};
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) CHECK(compare_versions(chain[i], chain[i + 1]) < 0);
  }
}
