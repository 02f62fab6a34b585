#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "flowforge/csv.hpp"
#include "flowforge/operators/algorithms.hpp"
#include "flowforge/operators/operator.hpp"
#include "flowforge/operators/table_store.hpp"
#include "support.hpp"

using namespace flowforge;
using fftest::error_of;

namespace {

TableFrame labels(const std::vector<std::string>& values) {
  TableFrame f({{"c", DType::kString}});
  for (const auto& v : values) f.append_row({v});
  return f;
}

std::vector<std::int64_t> int_column(const TableFrame& f, std::string_view name) {
  auto i = f.column_index(name);
  std::vector<std::int64_t> out;
  for (const auto& r : f.rows()) out.push_back(std::get<std::int64_t>(r[i]));
  return out;
}

TableFrame points_frame(const std::vector<std::vector<double>>& pts) {
  TableFrame f({{"x", DType::kFloat}, {"y", DType::kFloat}});
  for (const auto& p : pts) f.append_row({p[0], p[1]});
  return f;
}

}  // namespace

TEST_SUITE("operators") {
  TEST_CASE("string indexer ranks by frequency") {
    std::vector<std::string> cols{"c"};
    auto out = ops::string_indexer(labels({"b", "a", "b", "c", "b", "a"}), cols);
    CHECK(int_column(out, "c_idx") == std::vector<std::int64_t>{0, 1, 0, 2, 0, 1});
    CHECK(out.num_columns() == 2);
  }

  TEST_CASE("string indexer ties go to the smaller label") {
    std::vector<std::string> cols{"c"};
    CHECK(int_column(ops::string_indexer(labels({"y", "x"}), cols), "c_idx") == std::vector<std::int64_t>{1, 0});
    CHECK(int_column(ops::string_indexer(labels({"z", "z"}), cols), "c_idx") == std::vector<std::int64_t>{0, 0});
  }

  TEST_CASE("string indexer errors") {
    std::vector<std::string> missing{"nope"};
    CHECK(error_of([&] { ops::string_indexer(labels({"a"}), missing); }) == Errc::kColumnNotFound);
    TableFrame ints({{"n", DType::kInt}}, {{std::int64_t{1}}});
    std::vector<std::string> n{"n"};
    CHECK(error_of([&] { ops::string_indexer(ints, n); }) == Errc::kColumnTypeError);
    std::vector<std::string> c{"c"};
    CHECK(error_of([&] { ops::string_indexer(labels({}), c); }) == Errc::kEmptyFrame);
  }

  TEST_CASE("k-means on two separated pairs") {
    auto r = ops::kmeans(points_frame({{0, 0}, {0.1, 0}, {10, 10}, {10.1, 10}}), std::vector<std::string>{"x", "y"},
                         {2, 1, 100, 1e-6});
    auto cl = int_column(r.frame, "cluster");
    CHECK(cl[0] == cl[1]);
    CHECK(cl[2] == cl[3]);
    CHECK(cl[0] != cl[2]);
    auto a = r.centroids.coordinates[static_cast<std::size_t>(cl[0])];
    auto b = r.centroids.coordinates[static_cast<std::size_t>(cl[2])];
    CHECK(std::abs(a[0] - 0.05) < 1e-9);
    CHECK(std::abs(a[1] - 0.0) < 1e-9);
    CHECK(std::abs(b[0] - 10.05) < 1e-9);
    CHECK(std::abs(b[1] - 10.0) < 1e-9);
  }

  TEST_CASE("k=1 gives the column means") {
    std::vector<std::vector<double>> pts{{1, 2}, {3, 4}, {5, 9}};
    auto fit = ops::kmeans_fit(pts, {1, 0, 100, 1e-6});
    CHECK(fit.centroids[0][0] == doctest::Approx(3.0));
    CHECK(fit.centroids[0][1] == doctest::Approx(5.0));
  }

  TEST_CASE("k-means validates k and features") {
    std::vector<std::vector<double>> dup{{1, 1}, {1, 1}, {2, 2}};
    CHECK(error_of([&] { ops::kmeans_fit(dup, {3, 0, 100, 1e-6}); }) == Errc::kKTooLarge);
    TableFrame f({{"s", DType::kString}}, {{std::string("a")}});
    CHECK(error_of([&] { ops::kmeans(f, std::vector<std::string>{"s"}, {1, 0, 100, 1e-6}); }) ==
          Errc::kNonNumericFeature);
  }

  TEST_CASE("k-means is deterministic and monotone") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 300; ++i) pts.push_back({g(rng) + (i % 3) * 4.0, g(rng)});
    auto a = ops::kmeans_fit(pts, {3, 9, 100, 1e-6});
    auto b = ops::kmeans_fit(pts, {3, 9, 100, 1e-6});
    CHECK(a.labels == b.labels);
    for (std::size_t i = 1; i < a.wcss_history.size(); ++i) CHECK(a.wcss_history[i] <= a.wcss_history[i - 1] + 1e-9);
    CHECK(a.converged);
  }

  TEST_CASE("assign_clusters matches the fit") {
    auto frame = points_frame({{0, 0}, {0.2, 0}, {5, 5}, {5.2, 5}});
    std::vector<std::string> feats{"x", "y"};
    auto r = ops::kmeans(frame, feats, {2, 4, 100, 1e-6});
    auto again = ops::assign_clusters(frame, r.centroids);
    CHECK(int_column(again, "cluster") == int_column(r.frame, "cluster"));
  }

  TEST_CASE("cluster summary") {
    TableFrame f({{"cluster", DType::kInt}, {"v", DType::kFloat}});
    for (auto [c, v] : std::vector<std::pair<int, double>>{{1, 1.0}, {1, 2.0}, {1, 3.0}, {2, 10.0}}) {
      f.append_row({std::int64_t{c}, v});
    }
    auto s = ops::cluster_summary(f, "cluster");
    REQUIRE(s.num_rows() == 2);
    CHECK(std::get<std::int64_t>(s.rows()[0][s.column_index("count")]) == 3);
    CHECK(std::get<double>(s.rows()[0][s.column_index("pct")]) == 75.0);
    CHECK(std::get<double>(s.rows()[1][s.column_index("pct")]) == 25.0);
    CHECK(std::get<double>(s.rows()[0][s.column_index("mean_v")]) == doctest::Approx(2.0));
    CHECK(error_of([&] { ops::cluster_summary(f, "nope"); }) == Errc::kColumnNotFound);

    TableFrame one({{"cluster", DType::kInt}}, {{std::int64_t{0}}, {std::int64_t{0}}});
    CHECK(std::get<double>(ops::cluster_summary(one, "cluster").rows()[0][2]) == 100.0);
  }

  TEST_CASE("central differences") {
    std::vector<double> x{0, 1, 4, 9};
    CHECK(ops::central_differences(x, 1.0) == std::vector<double>{2.0, 4.0});
  }

  TEST_CASE("derivative workload checksum ignores parallelism") {
    auto one = ops::derivative_workload(20000, 2, 1);
    auto four = ops::derivative_workload(20000, 2, 4);
    CHECK(one.checksum == four.checksum);
    // Interior derivatives of sin(i/n) sum to about n * (sin(1) - sin(0)).
    CHECK(one.checksum == doctest::Approx(20000 * std::sin(1.0)).epsilon(1e-3));
    CHECK(error_of([] { ops::derivative_workload(2, 1, 1); }) == Errc::kInvalidSize);
    CHECK(error_of([] { ops::derivative_workload(10, 0, 1); }) == Errc::kInvalidSize);
  }

  TEST_CASE("workload workers follow the configuration") {
    auto space = opt::spark_like_space();
    auto p = space.default_point();
    CHECK(ops::workload_workers(p) == std::min<std::size_t>(2, std::max(1u, std::thread::hardware_concurrency())));
  }

  TEST_CASE("table store") {
    fftest::TempDir dir;
    TableStore store(dir.path());
    TableFrame f({{"a", DType::kInt}}, {{std::int64_t{1}}});
    store.write("t1", f);
    store.append("t1", f);
    CHECK(store.read("t1").num_rows() == 2);
    store.write("t1", f);
    CHECK(store.read("t1").num_rows() == 1);
    CHECK(store.list() == std::vector<std::string>{"t1"});
    CHECK(error_of([&] { store.read("missing"); }) == Errc::kNotFound);
    TableFrame other({{"b", DType::kInt}}, {{std::int64_t{1}}});
    CHECK(error_of([&] { store.append("t1", other); }) == Errc::kSchemaMismatch);
    CHECK_FALSE(TableStore::valid_name("../x"));
  }

  TEST_CASE("builtin descriptors are valid and resolvable") {
    Catalogue c;
    for (const auto& d : builtin_descriptors()) {
      CHECK(check_descriptor(d).empty());
      c.register_service(d);
      CHECK(OperatorRegistry::builtins().create(d) != nullptr);
    }
    ServiceDescriptor bogus = builtin_descriptors().front();
    bogus.artifact_ref = "builtin:nope";
    CHECK(error_of([&] { OperatorRegistry::builtins().create(bogus); }) == Errc::kOperatorInitError);
  }

  TEST_CASE("conservation declarations") {
    auto find = [](const std::string& name) {
      for (const auto& d : builtin_descriptors()) {
        if (d.name == name) return OperatorRegistry::builtins().create(d);
      }
      return std::unique_ptr<Operator>();
    };
    CHECK(find("string-indexer")->conservation() == Conservation::kOneToOne);
    CHECK(find("kmeans")->conservation() == Conservation::kOneToOne);
    CHECK(find("filter")->conservation() == Conservation::kFiltering);
  }

  TEST_CASE("split_list") {
    CHECK(split_list("a,,b, c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_list("").empty());
  }

  TEST_CASE("routes fixture parses and indexes") {
    auto r = read_csv(fftest::fixture("routes_5000.csv"), {});
    CHECK(r.frame.num_rows() == 5000);
    CHECK(r.skipped_rows == 0);
    std::vector<std::string> cols{"sourceAirport", "destinationAirport"};
    auto idx = ops::string_indexer(r.frame, cols);
    auto k = ops::kmeans(idx, std::vector<std::string>{"sourceAirport_idx", "destinationAirport_idx"},
                         {3, 42, 100, 1e-6});
    for (auto c : int_column(k.frame, "cluster")) CHECK((c >= 0 && c <= 2));
    for (std::size_t i = 1; i < k.fit.wcss_history.size(); ++i) {
      CHECK(k.fit.wcss_history[i] <= k.fit.wcss_history[i - 1] + 1e-6);
    }
    auto nulls = read_csv(fftest::fixture("routes_nulls.csv"), {});
    CHECK(nulls.skipped_rows > 0);
    CHECK(nulls.frame.num_rows() + nulls.skipped_rows == 40);
  }
}
