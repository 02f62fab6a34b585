#include <doctest.h>

#include "flowforge/operators/operator.hpp"
#include "live_gateway.hpp"

using namespace flowforge;
using namespace std::chrono_literals;
using fftest::body_of;
using fftest::LiveGateway;
using nlohmann::json;

namespace {

const char* kJson = "application/json";

json custom_service(const std::string& name, const std::string& version) {
  ServiceDescriptor d;
  d.name = name;
  d.version = version;
  d.kind = ServiceKind::kProcessor;
  d.description = "custom processor";
  d.artifact_ref = "builtin:filter";
  d.tags = {"custom"};
  return descriptor_to_json(d);
}

/// Everything a 4xx must leave untouched.
json snapshot(Platform& p) {
  json s;
  for (const auto& d : p.catalogue().list_services({})) s["services"].push_back(descriptor_to_json(d));
  for (auto mode : {WorkflowMode::kStream, WorkflowMode::kBatch}) {
    for (const auto& w : p.list_workflows(mode)) s["workflows"].push_back(definition_to_json(w));
  }
  for (const auto& r : p.executor().list_runs()) s["runs"].push_back(r.run_id);
  for (const auto& src : p.sources().list()) s["sources"].push_back(viz::source_to_json(src));
  for (const auto& j : p.optimizer().list()) s["jobs"].push_back(j.job_id);
  return s;
}

void check_error(const httplib::Result& r, int status, const std::string& code) {
  REQUIRE(r);
  CHECK(r->status == status);
  auto body = body_of(r);
  CHECK(body["status"] == status);
  CHECK(body["code"] == code);
  CHECK(body["message"].is_string());
  CHECK(body.contains("details"));
}

}  // namespace

TEST_SUITE("gateway") {
  TEST_CASE("health and unknown routes") {
    LiveGateway gw;
    auto c = gw.client();
    auto h = c.Get("/api/health");
    REQUIRE(h);
    CHECK(h->status == 200);
    check_error(c.Get("/api/nothing"), 404, "not_found");
    auto ui = c.Get("/ui/");
    REQUIRE(ui);
    CHECK(ui->status == 200);
  }

  TEST_CASE("auth guard") {
    SUBCASE("token set") {
      LiveGateway gw(std::string("s3cret"));
      auto c = gw.client();
      check_error(c.Get("/api/services"), 401, "unauthorized");
      check_error(c.Get("/api/services", {{"Authorization", "Bearer wrong"}}), 401, "unauthorized");
      auto ok = c.Get("/api/services", {{"Authorization", "Bearer s3cret"}});
      REQUIRE(ok);
      CHECK(ok->status == 200);
      auto h = c.Get("/api/health");
      REQUIRE(h);
      CHECK(h->status == 200);
      auto before = snapshot(gw.platform);
      check_error(c.Post("/api/services", custom_service("x", "1.0.0").dump(), kJson), 401, "unauthorized");
      CHECK(snapshot(gw.platform) == before);
    }
    SUBCASE("token unset") {
      LiveGateway gw;
      auto ok = gw.client().Get("/api/services");
      REQUIRE(ok);
      CHECK(ok->status == 200);
    }
  }

  TEST_CASE("service endpoints mirror the catalogue") {
    LiveGateway gw;
    auto c = gw.client();
    auto created = c.Post("/api/services", custom_service("my-proc", "1.0.0").dump(), kJson);
    REQUIRE(created);
    CHECK(created->status == 201);
    CHECK(created->get_header_value("Location") == "/api/services/my-proc/1.0.0");

    auto before = snapshot(gw.platform);
    auto dup = c.Post("/api/services", custom_service("my-proc", "1.0.0").dump(), kJson);
    check_error(dup, 409, "duplicate_service");
    check_error(c.Post("/api/services", R"({"name":3})", kJson), 400, "invalid_descriptor");
    check_error(c.Post("/api/services", "{broken", kJson), 400, "invalid_argument");
    check_error(c.Get("/api/services?kind=bogus"), 400, "invalid_argument");
    check_error(c.Get("/api/services/ghost"), 404, "not_found");
    check_error(c.Delete("/api/services/ghost/1.0.0"), 404, "not_found");
    CHECK(snapshot(gw.platform) == before);

    json direct = json::array();
    for (const auto& d : gw.platform.catalogue().list_services({})) direct.push_back(descriptor_to_json(d));
    CHECK(body_of(c.Get("/api/services")) == direct);

    ServiceFilter f;
    f.kind = ServiceKind::kSource;
    json sources = json::array();
    for (const auto& d : gw.platform.catalogue().list_services(f)) sources.push_back(descriptor_to_json(d));
    CHECK(body_of(c.Get("/api/services?kind=source")) == sources);
    CHECK(body_of(c.Get("/api/services?tag=custom")).size() == 1);

    CHECK(body_of(c.Get("/api/services/my-proc")) == descriptor_to_json(gw.platform.catalogue().get_service("my-proc")));
    CHECK(body_of(c.Get("/api/services/my-proc/1.0.0")) ==
          descriptor_to_json(gw.platform.catalogue().get_service("my-proc", "1.0.0")));
    auto del = c.Delete("/api/services/my-proc/1.0.0");
    REQUIRE(del);
    CHECK(del->status == 204);
    check_error(c.Get("/api/services/my-proc/1.0.0"), 404, "not_found");
  }

  TEST_CASE("stream lifecycle") {
    LiveGateway gw;
    auto c = gw.client();
    json create{{"name", "ticks"}, {"dsl", "tick-source --limit=5 --interval-ms=1 | log-sink"}};
    auto r = c.Post("/api/streams", create.dump(), kJson);
    REQUIRE(r);
    CHECK(r->status == 201);
    CHECK(r->get_header_value("Location") == "/api/streams/ticks");
    auto created = body_of(r);
    CHECK(created["deployed_run"].is_null());

    auto before = snapshot(gw.platform);
    check_error(c.Post("/api/streams", create.dump(), kJson), 409, "duplicate_workflow");
    check_error(c.Post("/api/streams", R"({"name":"bad","dsl":"tick-source |"})", kJson), 400, "syntax_error");
    check_error(c.Post("/api/streams", R"({"name":"bad","dsl":"nope | log-sink"})", kJson), 422,
                "unknown_service");
    check_error(c.Post("/api/streams", R"({"name":"bad"})", kJson), 400, "invalid_argument");
    check_error(c.Delete("/api/streams/ticks"), 409, "not_running");
    check_error(c.Post("/api/streams/ghost/deploy", "", kJson), 404, "not_found");
    CHECK(snapshot(gw.platform) == before);

    auto deployed = c.Post("/api/streams/ticks/deploy", "", kJson);
    REQUIRE(deployed);
    CHECK(deployed->status == 201);
    auto run_id = body_of(deployed)["run_id"].get<std::string>();
    CHECK(deployed->get_header_value("Location") == "/api/runs/" + run_id);
    check_error(c.Post("/api/streams/ticks/deploy", "", kJson), 409, "already_deployed");
    CHECK(body_of(c.Get("/api/streams/ticks"))["deployed_run"] == run_id);
    check_error(c.Delete("/api/tasks/ticks"), 404, "not_found");

    auto undeployed = c.Delete("/api/streams/ticks");
    REQUIRE(undeployed);
    CHECK(undeployed->status == 200);
    CHECK(body_of(undeployed)["run_id"] == run_id);
    CHECK(body_of(c.Get("/api/runs/" + run_id)) == run_to_json(gw.platform.executor().get_run(run_id)));
    CHECK(body_of(c.Get("/api/runs/" + run_id))["state"] == "undeployed");

    auto destroyed = c.Delete("/api/streams/ticks?destroy=true");
    REQUIRE(destroyed);
    CHECK(destroyed->status == 200);
    CHECK(body_of(destroyed)["destroyed"] == true);
    check_error(c.Get("/api/streams/ticks"), 404, "not_found");
  }

  TEST_CASE("task launch, runs and metrics") {
    LiveGateway gw;
    auto c = gw.client();
    auto csv = fftest::fixture("routes_10.csv").string();
    json create{{"name", "batch"},
                {"dsl", "load-csv --path=" + csv + " && index-strings --columns=sourceAirport,destinationAirport && "
                        "kmeans-train --k=3 --seed=42 && save-table --name=clustered_routes"}};
    auto r = c.Post("/api/tasks", create.dump(), kJson);
    REQUIRE(r);
    REQUIRE(r->status == 201);
    check_error(c.Post("/api/streams", json{{"name", "batch"}, {"dsl", "tick-source | log-sink"}}.dump(), kJson), 409,
                "duplicate_workflow");
    check_error(c.Post("/api/tasks/batch/launch", R"({"config":{"executor_instances":99}})", kJson), 422,
                "invalid_space");

    auto launched = c.Post("/api/tasks/batch/launch", "", kJson);
    REQUIRE(launched);
    CHECK(launched->status == 202);
    auto run_id = body_of(launched)["run_id"].get<std::string>();
    auto done = gw.platform.executor().wait(run_id, 30s);
    CHECK(run_state_name(done.state) == "completed");
    CHECK(body_of(c.Get("/api/runs/" + run_id)) == run_to_json(gw.platform.executor().get_run(run_id)));
    CHECK(body_of(c.Get("/api/runs/" + run_id + "/metrics")) ==
          metrics_to_json(gw.platform.executor().get_metrics(run_id)));
    CHECK(body_of(c.Get("/api/runs?workflow=batch")).size() == 1);
    CHECK(body_of(c.Get("/api/runs?state=failed")).empty());
    check_error(c.Get("/api/runs/unknown"), 404, "not_found");
    check_error(c.Get("/api/runs/unknown/metrics"), 404, "not_found");

    auto tables = body_of(c.Get("/api/viz/sources/internal/tables"));
    REQUIRE(tables.size() == 1);
    CHECK(tables[0]["name"] == "clustered_routes");
    CHECK(tables[0]["row_count"] == 10);

    auto del = c.Delete("/api/tasks/batch");
    REQUIRE(del);
    CHECK(del->status == 204);
  }

  TEST_CASE("dsl parse endpoint") {
    LiveGateway gw;
    auto c = gw.client();
    auto r = c.Post("/api/dsl/parse", R"({"dsl":"tick-source|log-sink"})", kJson);
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(body_of(r)["dsl"] == "tick-source | log-sink");
    check_error(c.Post("/api/dsl/parse", R"({"dsl":"a && b","mode":"sideways"})", kJson), 400, "invalid_argument");
  }

  TEST_CASE("optimizer jobs") {
    LiveGateway gw;
    auto c = gw.client();
    auto before = snapshot(gw.platform);
    check_error(c.Post("/api/optimizer/jobs", R"({"rrs":{"eval_budget":3}})", kJson), 422, "budget_too_small");
    CHECK(snapshot(gw.platform) == before);
    auto r = c.Post("/api/optimizer/jobs", R"({"training_n":30,"seed":3,"rrs":{"eval_budget":60}})", kJson);
    REQUIRE(r);
    CHECK(r->status == 202);
    auto id = body_of(r)["job_id"].get<std::string>();
    auto report = gw.platform.optimizer().wait(id, 60s);
    CHECK(report.state == opt::JobState::kSucceeded);
    CHECK(body_of(c.Get("/api/optimizer/jobs/" + id)) == opt::report_to_json(gw.platform.optimizer().get(id)));
    auto list = body_of(c.Get("/api/optimizer/jobs"));
    REQUIRE(list.size() == 1);
    CHECK(list[0]["job_id"] == id);
    check_error(c.Get("/api/optimizer/jobs/nope"), 404, "not_found");
  }

  TEST_CASE("viz endpoints") {
    LiveGateway gw;
    auto c = gw.client();
    TableFrame f({{"sourceAirport_idx", DType::kInt}, {"destinationAirport_idx", DType::kInt}, {"cluster", DType::kInt}});
    for (std::int64_t i = 0; i < 60; ++i) f.append_row({i % 17, (i * 5) % 23, i % 3});
    gw.platform.tables().write("clustered", f);

    auto before = snapshot(gw.platform);
    check_error(c.Post("/api/viz/sources", R"({"kind":"cassandra","location":"x"})", kJson), 422, "unsupported_kind");
    check_error(c.Post("/api/viz/sources", R"({"kind":"delimited-file","location":"/nope.csv"})", kJson), 422,
                "unreachable_source");
    check_error(c.Get("/api/viz/sources/ghost/tables"), 404, "not_found");
    check_error(c.Post("/api/viz/query", R"({"table":"clustered","select":["zz"]})", kJson), 422, "unknown_column");
    check_error(c.Post("/api/viz/query", R"({"table":"clustered","filters":[{"column":"cluster","op":"=","literal":"x"}]})",
                       kJson),
                422, "type_error");
    check_error(c.Post("/api/viz/recommend", R"({"schema":[{"name":"a","dtype":"int"}],"rows":[]})", kJson), 422,
                "empty_frame");
    CHECK(snapshot(gw.platform) == before);

    auto added = c.Post("/api/viz/sources",
                        json{{"kind", "delimited-file"}, {"location", fftest::fixture("routes_10.csv").string()}}.dump(),
                        kJson);
    REQUIRE(added);
    CHECK(added->status == 201);
    CHECK(added->get_header_value("Location") == "/api/viz/sources/src-1");
    json listed = json::array();
    for (const auto& s : gw.platform.sources().list()) listed.push_back(viz::source_to_json(s));
    CHECK(body_of(c.Get("/api/viz/sources")) == listed);

    json q{{"table", "clustered"}, {"group_by", {"cluster"}}, {"aggregates", {{{"fn", "count"}}}}};
    auto direct = viz::run_query(f, viz::query_from_json(q));
    CHECK(body_of(c.Post("/api/viz/query", q.dump(), kJson)) == frame_to_json(direct));

    json expected = json::array();
    for (const auto& rec : viz::recommend_charts(f)) expected.push_back(viz::recommendation_to_json(rec));
    CHECK(body_of(c.Post("/api/viz/recommend", frame_to_json(f).dump(), kJson)) == expected);
    CHECK(body_of(c.Post("/api/viz/recommend", json{{"query", {{"table", "clustered"}}}}.dump(), kJson)) == expected);
    auto top = body_of(c.Post("/api/viz/recommend", json{{"table", "clustered"}}.dump(), kJson))[0];
    CHECK(top["chart_type"] == "scatter");
    CHECK(top["encoding"]["color"] == "cluster");
  }

  TEST_CASE("refresh over server-sent events") {
    LiveGateway gw;
    TableFrame f({{"n", DType::kInt}}, {{std::int64_t{1}}, {std::int64_t{2}}});
    gw.platform.tables().write("t", f);
    auto c = gw.client();
    json spec{{"table", "t"}};
    auto path = "/api/viz/refresh?interval_ms=100&max_events=3&spec=" + httplib::detail::encode_url(spec.dump());
    auto r = c.Get(path);
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->get_header_value("Content-Type").find("text/event-stream") == 0);
    std::size_t frames = 0;
    for (auto pos = r->body.find("event: frame"); pos != std::string::npos; pos = r->body.find("event: frame", pos + 1)) {
      ++frames;
    }
    CHECK(frames == 3);
    auto data = r->body.substr(r->body.find("data: ") + 6);
    data = data.substr(0, data.find('\n'));
    CHECK(json::parse(data) == frame_to_json(f));

    check_error(c.Get("/api/viz/refresh?interval_ms=50&spec=" + httplib::detail::encode_url(spec.dump())), 400,
                "invalid_argument");
    check_error(c.Get("/api/viz/refresh?spec=" + httplib::detail::encode_url(R"({"table":"ghost"})")), 404,
                "not_found");
  }

  TEST_CASE("bind failure") {
    LiveGateway gw;
    ServerConfig cfg;
    cfg.port = gw.port;
    Server second(gw.platform, cfg);
    CHECK(fftest::error_of([&] { second.bind(); }) == Errc::kBindError);
  }
}
