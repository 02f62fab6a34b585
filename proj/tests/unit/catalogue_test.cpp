#include <doctest.h>

#include <fstream>
#include <thread>

#include "flowforge/catalogue.hpp"
#include "support.hpp"

using namespace flowforge;
using fftest::error_of;
using nlohmann::json;

namespace {

ServiceDescriptor svc(std::string name, std::string version, ServiceKind kind = ServiceKind::kProcessor,
                      std::string description = "") {
  ServiceDescriptor d;
  d.name = std::move(name);
  d.version = std::move(version);
  d.kind = kind;
  d.description = std::move(description);
  d.artifact_ref = "builtin:" + d.name;
  return d;
}

ServiceDescriptor indexer() {
  auto d = svc("string-indexer", "1.0.0");
  d.params.push_back({"columns", ParamType::kString, {}, std::nullopt, true, "columns to encode"});
  d.tags = {"feature"};
  return d;
}

std::vector<std::string> names(const std::vector<ServiceDescriptor>& ds) {
  std::vector<std::string> out;
  for (const auto& d : ds) out.push_back(d.name + "@" + d.version);
  return out;
}

}  // namespace

TEST_SUITE("catalogue") {
  TEST_CASE("register then list and get") {
    Catalogue c;
    auto id = c.register_service(indexer());
    CHECK(id.str() == "string-indexer@1.0.0");
    CHECK(c.list_services().size() == 1);
    CHECK(c.get_service("string-indexer") == indexer());
  }

  TEST_CASE("duplicate registration leaves state unchanged") {
    Catalogue c;
    c.register_service(indexer());
    auto changed = indexer();
    changed.description = "other";
    CHECK(error_of([&] { c.register_service(changed); }) == Errc::kDuplicateService);
    CHECK(c.get_service("string-indexer").description.empty());
    CHECK(c.size() == 1);
  }

  TEST_CASE("invalid descriptors report fields") {
    Catalogue c;
    try {
      c.register_service(svc("BadName", "1.0.0"));
      FAIL("expected InvalidDescriptor");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kInvalidDescriptor);
      CHECK(e.details().dump().find("name") != std::string::npos);
    }
    CHECK(error_of([&] { c.register_service(svc("ok", "1.0")); }) == Errc::kInvalidDescriptor);

    auto dup = svc("dup-params", "1.0.0");
    dup.params.push_back({"p", ParamType::kInt, {}, Value{std::int64_t{1}}, false, ""});
    dup.params.push_back({"p", ParamType::kInt, {}, Value{std::int64_t{1}}, false, ""});
    CHECK(error_of([&] { c.register_service(dup); }) == Errc::kInvalidDescriptor);

    auto req_default = svc("req-default", "1.0.0");
    req_default.params.push_back({"p", ParamType::kInt, {}, Value{std::int64_t{1}}, true, ""});
    CHECK(error_of([&] { c.register_service(req_default); }) == Errc::kInvalidDescriptor);

    auto opt_no_default = svc("opt-nodef", "1.0.0");
    opt_no_default.params.push_back({"p", ParamType::kInt, {}, std::nullopt, false, ""});
    CHECK(error_of([&] { c.register_service(opt_no_default); }) == Errc::kInvalidDescriptor);

    auto bad_enum = svc("bad-enum", "1.0.0");
    bad_enum.params.push_back({"mode", ParamType::kEnum, {"a", "b"}, Value{std::string("c")}, false, ""});
    CHECK(error_of([&] { c.register_service(bad_enum); }) == Errc::kInvalidDescriptor);

    CHECK(error_of([&] { c.register_service(svc(std::string(65, 'a'), "1.0.0")); }) == Errc::kInvalidDescriptor);
    CHECK(c.size() == 0);
  }

  TEST_CASE("default version is the highest semantic version") {
    Catalogue c;
    auto a = indexer();
    c.register_service(a);
    a.version = "1.2.0";
    c.register_service(a);
    a.version = "1.10.0-rc.1";
    c.register_service(a);
    CHECK(c.get_service("string-indexer").version == "1.10.0-rc.1");
    CHECK(c.get_service("string-indexer", std::string_view("1.0.0")).version == "1.0.0");
    CHECK(error_of([&] { c.get_service("missing"); }) == Errc::kNotFound);
    CHECK(error_of([&] { c.get_service("string-indexer", std::string_view("9.9.9")); }) == Errc::kNotFound);
  }

  TEST_CASE("filters") {
    Catalogue c;
    c.register_service(svc("file-source", "1.0.0", ServiceKind::kSource));
    c.register_service(indexer());
    c.register_service(svc("kmeans", "1.0.0", ServiceKind::kProcessor, "clusters rows"));
    c.register_service(svc("table-sink", "1.0.0", ServiceKind::kSink, "stores an indexed table"));
    c.register_service(svc("load-csv", "1.0.0", ServiceKind::kTask));

    ServiceFilter by_kind;
    by_kind.kind = ServiceKind::kProcessor;
    CHECK(names(c.list_services(by_kind)) == std::vector<std::string>{"kmeans@1.0.0", "string-indexer@1.0.0"});

    ServiceFilter by_text;
    by_text.text = "index";
    CHECK(names(c.list_services(by_text)) == std::vector<std::string>{"string-indexer@1.0.0", "table-sink@1.0.0"});

    ServiceFilter by_tag;
    by_tag.tag = "feature";
    CHECK(names(c.list_services(by_tag)) == std::vector<std::string>{"string-indexer@1.0.0"});

    CHECK(names(c.list_services()).front() == "file-source@1.0.0");
    Catalogue empty;
    CHECK(empty.list_services().empty());
  }

  TEST_CASE("list orders versions semantically") {
    Catalogue c;
    for (const char* v : {"1.10.0", "1.2.0", "1.2.0-beta"}) c.register_service(svc("x", v));
    CHECK(names(c.list_services()) == std::vector<std::string>{"x@1.2.0-beta", "x@1.2.0", "x@1.10.0"});
  }

  TEST_CASE("unregister") {
    Catalogue c;
    c.register_service(indexer());
    auto in_use = [](const std::string& name, const std::string&) { return name == "string-indexer"; };
    CHECK(error_of([&] { c.unregister_service("string-indexer", "1.0.0", in_use); }) == Errc::kInUse);
    CHECK(c.size() == 1);
    c.unregister_service("string-indexer", "1.0.0");
    CHECK(error_of([&] { c.get_service("string-indexer"); }) == Errc::kNotFound);
    CHECK(error_of([&] { c.unregister_service("string-indexer", "1.0.0"); }) == Errc::kNotFound);
  }

  TEST_CASE("journal replay restores state and skips garbage") {
    fftest::TempDir dir;
    auto journal = dir / "catalogue.jsonl";
    {
      Catalogue c(journal);
      c.register_service(indexer());
      c.register_service(svc("kmeans", "1.0.0"));
      c.unregister_service("kmeans", "1.0.0");
    }
    {
      std::ofstream out(journal, std::ios::app);
      out << "{not json\n";
    }
    std::ifstream in(journal);
    std::string first;
    std::getline(in, first);
    auto line = json::parse(first);
    CHECK(line["op"] == "register");
    CHECK(line["descriptor"]["name"] == "string-indexer");

    Catalogue replayed(journal);
    CHECK(replayed.size() == 1);
    CHECK(replayed.get_service("string-indexer") == indexer());
    CHECK(replayed.skipped_journal_lines() == 1);
  }

  TEST_CASE("canonical json round-trip") {
    auto d = indexer();
    d.params.push_back({"mode", ParamType::kEnum, {"fast", "exact"}, Value{std::string("fast")}, false, "m"});
    d.params.push_back({"ratio", ParamType::kFloat, {}, Value{0.5}, false, ""});
    auto back = descriptor_from_json(json::parse(canonical_json(d)));
    CHECK(back == d);
    CHECK(canonical_json(back) == canonical_json(d));
  }

  TEST_CASE("descriptor_from_json collects reasons") {
    try {
      descriptor_from_json(json{{"name", 3}, {"kind", "bogus"}});
      FAIL("expected InvalidDescriptor");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kInvalidDescriptor);
      CHECK(e.details()["reasons"].size() >= 3);
    }
  }

  TEST_CASE("coerce_param") {
    ParamSpec i{"k", ParamType::kInt, {}, std::nullopt, true, ""};
    CHECK(std::get<std::int64_t>(*coerce_param(i, "3")) == 3);
    CHECK_FALSE(coerce_param(i, "3.0").has_value());
    CHECK_FALSE(coerce_param(i, "x").has_value());
    ParamSpec f{"r", ParamType::kFloat, {}, std::nullopt, true, ""};
    CHECK(std::get<double>(*coerce_param(f, "1e-3")) == doctest::Approx(1e-3));
    CHECK(std::get<double>(*coerce_param(f, "2")) == 2.0);
    ParamSpec b{"b", ParamType::kBool, {}, std::nullopt, true, ""};
    CHECK(std::get<bool>(*coerce_param(b, "TRUE")));
    CHECK_FALSE(coerce_param(b, "yes").has_value());
    ParamSpec e{"e", ParamType::kEnum, {"java", "kryo"}, std::nullopt, true, ""};
    CHECK(std::get<std::string>(*coerce_param(e, "kryo")) == "kryo");
    CHECK_FALSE(coerce_param(e, "Kryo").has_value());
  }

  TEST_CASE("concurrent registration") {
    Catalogue c;
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&c, t] {
        for (int i = 0; i < 25; ++i) c.register_service(svc("s" + std::to_string(t), "1.0." + std::to_string(i)));
      });
    }
    for (auto& th : threads) th.join();
    CHECK(c.size() == 100);
  }
}
