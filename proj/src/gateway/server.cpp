#include "flowforge/gateway/server.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>

#include <httplib.h>

namespace flowforge {

using nlohmann::json;
using httplib::Request;
using httplib::Response;

json api_error_body(const Error& e) {
  return {{"status", errc_http_status(e.code())},
          {"code", errc_code(e.code())},
          {"message", e.what()},
          {"details", e.details()}};
}

namespace {

const char* kJson = "application/json";

void send_json(Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(Response& res, const Error& e) { send_json(res, errc_http_status(e.code()), api_error_body(e)); }

json body_json(const Request& req) {
  if (req.body.empty()) throw Error(Errc::kInvalidArgument, "request body must be JSON");
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("malformed JSON body: ") + e.what());
  }
}

json optional_body(const Request& req) {
  if (req.body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  return body_json(req);
}

std::string required_string(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
    throw Error(Errc::kInvalidArgument, std::string("field '") + key + "' must be a string", {{"field", key}});
  }
  return j[key].get<std::string>();
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const Request& req, Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, Error(Errc::kInvalidArgument, std::string("malformed request: ") + e.what()));
    } catch (const std::exception& e) {
      send_error(res, Error(Errc::kInternal, e.what()));
    }
  };
}

json workflow_json(Platform& p, const WorkflowDefinition& def) {
  auto j = definition_to_json(def);
  try {
    j["dsl"] = dsl::serialize(def);
  } catch (const Error&) {
    j["dsl"] = nullptr;
  }
  if (def.mode == WorkflowMode::kStream) {
    auto live = p.executor().live_stream(def.name);
    j["deployed_run"] = live ? json(*live) : json(nullptr);
  }
  return j;
}

std::optional<json> config_of(const json& body) {
  if (body.is_object() && body.contains("config") && !body["config"].is_null()) return body["config"];
  return std::nullopt;
}

const char* kPlaceholderUi = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>flowforge</title></head>
<body><h1>flowforge gateway</h1>
<p>The dashboard assets are not installed. The HTTP API lives under <code>/api</code>.</p>
</body></html>
)";

// Queue between a refresh handle's timer worker and the SSE writer.
struct EventQueue {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::string> events;

  void push(std::string e) {
    {
      std::lock_guard lock(mutex);
      events.push_back(std::move(e));
    }
    cv.notify_all();
  }
};

}  // namespace

struct Server::Impl {
  Platform& platform;
  ServerConfig config;
  httplib::Server http;

  Impl(Platform& p, ServerConfig c) : platform(p), config(std::move(c)) {
    // SO_REUSEPORT would let a second server share a busy port.
    http.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  void routes();
  void service_routes();
  void workflow_routes(WorkflowMode mode);
  void run_routes();
  void optimizer_routes();
  void viz_routes();
};

void Server::Impl::routes() {
  http.set_pre_routing_handler([this](const Request& req, Response& res) {
    if (!config.auth_token || req.path.rfind("/api/", 0) != 0 || req.path == "/api/health") {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    if (req.get_header_value("Authorization") == "Bearer " + *config.auth_token) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    send_error(res, Error(Errc::kUnauthorized, "missing or invalid bearer token"));
    return httplib::Server::HandlerResponse::Handled;
  });
  http.set_error_handler([](const Request& req, Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send_error(res, Error(Errc::kNotFound, "route not found: " + req.method + " " + req.path));
    } else {
      send_json(res, res.status, {{"status", res.status}, {"code", "http_error"}, {"message", "request failed"},
                                  {"details", json::object()}});
    }
  });

  http.Get("/api/health", [](const Request&, Response& res) { send_json(res, 200, {{"status", "ok"}}); });

  http.Post("/api/dsl/parse", guarded([this](const Request& req, Response& res) {
    auto body = body_json(req);
    auto text = required_string(body, "dsl");
    auto mode = parse_mode(body.value("mode", std::string("stream")));
    if (!mode) throw Error(Errc::kInvalidArgument, "mode must be stream or task");
    auto def = dsl::parse(text, *mode, body.value("name", std::string("draft")));
    auto vw = dsl::validate(def, platform.catalogue());
    send_json(res, 200, {{"definition", definition_to_json(def)}, {"dsl", dsl::serialize(def)},
                         {"validated", validated_to_json(vw)}});
  }));

  service_routes();
  workflow_routes(WorkflowMode::kStream);
  workflow_routes(WorkflowMode::kBatch);
  run_routes();
  optimizer_routes();
  viz_routes();

  if (!config.ui_dir.empty() && std::filesystem::exists(config.ui_dir / "index.html")) {
    http.set_mount_point("/ui", config.ui_dir.string());
  } else {
    http.Get("/ui", [](const Request&, Response& res) { res.set_content(kPlaceholderUi, "text/html"); });
    http.Get("/ui/", [](const Request&, Response& res) { res.set_content(kPlaceholderUi, "text/html"); });
  }
  http.Get("/", [](const Request&, Response& res) { res.set_redirect("/ui/"); });
}

void Server::Impl::service_routes() {
  http.Post("/api/services", guarded([this](const Request& req, Response& res) {
    auto descriptor = descriptor_from_json(body_json(req));
    auto id = platform.register_service(descriptor);
    res.set_header("Location", "/api/services/" + id.name + "/" + id.version);
    send_json(res, 201, {{"id", id.str()}, {"name", id.name}, {"version", id.version}});
  }));
  http.Get("/api/services", guarded([this](const Request& req, Response& res) {
    ServiceFilter filter;
    if (req.has_param("kind")) {
      filter.kind = parse_kind(req.get_param_value("kind"));
      if (!filter.kind) throw Error(Errc::kInvalidArgument, "unknown kind '" + req.get_param_value("kind") + "'");
    }
    if (req.has_param("tag")) filter.tag = req.get_param_value("tag");
    if (req.has_param("q")) filter.text = req.get_param_value("q");
    json out = json::array();
    for (const auto& d : platform.catalogue().list_services(filter)) out.push_back(descriptor_to_json(d));
    send_json(res, 200, out);
  }));
  http.Get(R"(/api/services/([^/]+))", guarded([this](const Request& req, Response& res) {
    send_json(res, 200, descriptor_to_json(platform.catalogue().get_service(req.matches[1].str())));
  }));
  http.Get(R"(/api/services/([^/]+)/([^/]+))", guarded([this](const Request& req, Response& res) {
    auto version = req.matches[2].str();
    send_json(res, 200, descriptor_to_json(platform.catalogue().get_service(req.matches[1].str(), version)));
  }));
  http.Delete(R"(/api/services/([^/]+)/([^/]+))", guarded([this](const Request& req, Response& res) {
    platform.unregister_service(req.matches[1].str(), req.matches[2].str());
    res.status = 204;
  }));
}

void Server::Impl::workflow_routes(WorkflowMode mode) {
  const std::string base = mode == WorkflowMode::kStream ? "/api/streams" : "/api/tasks";
  http.Post(base, guarded([this, mode, base](const Request& req, Response& res) {
    auto body = body_json(req);
    auto def = platform.create_workflow(required_string(body, "name"), required_string(body, "dsl"), mode);
    res.set_header("Location", base + "/" + def.name);
    send_json(res, 201, workflow_json(platform, def));
  }));
  http.Get(base, guarded([this, mode](const Request&, Response& res) {
    json out = json::array();
    for (const auto& def : platform.list_workflows(mode)) out.push_back(workflow_json(platform, def));
    send_json(res, 200, out);
  }));
  http.Get(base + R"(/([^/]+))", guarded([this, mode](const Request& req, Response& res) {
    send_json(res, 200, workflow_json(platform, platform.get_workflow(req.matches[1].str(), mode)));
  }));

  if (mode == WorkflowMode::kStream) {
    http.Post(base + R"(/([^/]+)/deploy)", guarded([this](const Request& req, Response& res) {
      auto run_id = platform.deploy_stream(req.matches[1].str(), config_of(optional_body(req)));
      res.set_header("Location", "/api/runs/" + run_id);
      send_json(res, 201, {{"run_id", run_id}});
    }));
    http.Delete(base + R"(/([^/]+))", guarded([this](const Request& req, Response& res) {
      auto name = req.matches[1].str();
      bool destroy = req.get_param_value("destroy") == "true";
      platform.get_workflow(name, WorkflowMode::kStream);
      std::optional<std::string> run_id;
      if (!destroy || platform.executor().live_stream(name)) run_id = platform.undeploy_stream(name);
      if (destroy) platform.delete_workflow(name, WorkflowMode::kStream);
      send_json(res, 200, {{"run_id", run_id ? json(*run_id) : json(nullptr)}, {"destroyed", destroy}});
    }));
  } else {
    http.Post(base + R"(/([^/]+)/launch)", guarded([this](const Request& req, Response& res) {
      auto run_id = platform.launch_task(req.matches[1].str(), config_of(optional_body(req)));
      res.set_header("Location", "/api/runs/" + run_id);
      send_json(res, 202, {{"run_id", run_id}});
    }));
    http.Delete(base + R"(/([^/]+))", guarded([this](const Request& req, Response& res) {
      platform.delete_workflow(req.matches[1].str(), WorkflowMode::kBatch);
      res.status = 204;
    }));
  }
}

void Server::Impl::run_routes() {
  http.Get("/api/runs", guarded([this](const Request& req, Response& res) {
    json out = json::array();
    for (const auto& r : platform.executor().list_runs()) {
      if (req.has_param("workflow") && r.workflow_name != req.get_param_value("workflow")) continue;
      if (req.has_param("state") && run_state_name(r.state) != req.get_param_value("state")) continue;
      out.push_back(run_to_json(r));
    }
    send_json(res, 200, out);
  }));
  http.Get(R"(/api/runs/([^/]+))", guarded([this](const Request& req, Response& res) {
    send_json(res, 200, run_to_json(platform.executor().get_run(req.matches[1].str())));
  }));
  http.Get(R"(/api/runs/([^/]+)/metrics)", guarded([this](const Request& req, Response& res) {
    send_json(res, 200, metrics_to_json(platform.executor().get_metrics(req.matches[1].str())));
  }));
}

void Server::Impl::optimizer_routes() {
  http.Post("/api/optimizer/jobs", guarded([this](const Request& req, Response& res) {
    auto spec = opt::job_spec_from_json(optional_body(req));
    auto id = platform.optimizer().start(spec);
    res.set_header("Location", "/api/optimizer/jobs/" + id);
    send_json(res, 202, {{"job_id", id}});
  }));
  http.Get("/api/optimizer/jobs", guarded([this](const Request&, Response& res) {
    json out = json::array();
    for (const auto& r : platform.optimizer().list()) {
      out.push_back({{"job_id", r.job_id},
                     {"state", opt::job_state_name(r.state)},
                     {"stage", r.stage},
                     {"created_at_ms", r.created_at_ms},
                     {"finished_at_ms", r.finished_at_ms ? json(*r.finished_at_ms) : json(nullptr)}});
    }
    send_json(res, 200, out);
  }));
  http.Get(R"(/api/optimizer/jobs/([^/]+))", guarded([this](const Request& req, Response& res) {
    send_json(res, 200, opt::report_to_json(platform.optimizer().get(req.matches[1].str())));
  }));
}

void Server::Impl::viz_routes() {
  http.Get("/api/viz/sources", guarded([this](const Request&, Response& res) {
    json out = json::array();
    for (const auto& s : platform.sources().list()) out.push_back(viz::source_to_json(s));
    send_json(res, 200, out);
  }));
  http.Post("/api/viz/sources", guarded([this](const Request& req, Response& res) {
    auto ref = viz::source_from_json(body_json(req));
    ref.id = platform.sources().add(ref);
    res.set_header("Location", "/api/viz/sources/" + ref.id);
    send_json(res, 201, viz::source_to_json(ref));
  }));
  http.Get(R"(/api/viz/sources/([^/]+)/tables)", guarded([this](const Request& req, Response& res) {
    json out = json::array();
    for (const auto& t : platform.sources().tables(req.matches[1].str())) out.push_back(viz::table_info_to_json(t));
    send_json(res, 200, out);
  }));
  http.Post("/api/viz/query", guarded([this](const Request& req, Response& res) {
    auto spec = viz::query_from_json(body_json(req));
    auto frame = viz::run_query(platform.sources().read(spec.source_id, spec.table), spec);
    send_json(res, 200, frame_to_json(frame));
  }));
  http.Post("/api/viz/recommend", guarded([this](const Request& req, Response& res) {
    auto body = body_json(req);
    TableFrame frame;
    if (body.is_object() && body.contains("schema")) {
      frame = frame_from_json(body);
    } else {
      auto spec = viz::query_from_json(body.is_object() && body.contains("query") ? body["query"] : body);
      frame = viz::run_query(platform.sources().read(spec.source_id, spec.table), spec);
    }
    json out = json::array();
    for (const auto& r : viz::recommend_charts(frame)) out.push_back(viz::recommendation_to_json(r));
    send_json(res, 200, out);
  }));
  http.Get("/api/viz/refresh", guarded([this](const Request& req, Response& res) {
    if (!req.has_param("spec")) throw Error(Errc::kInvalidArgument, "parameter 'spec' is required");
    json jspec;
    try {
      jspec = json::parse(req.get_param_value("spec"));
    } catch (const json::exception&) {
      throw Error(Errc::kInvalidArgument, "parameter 'spec' must be JSON");
    }
    auto spec = viz::query_from_json(jspec);
    long interval = 1000;
    std::size_t max_events = 0;
    try {
      if (req.has_param("interval_ms")) interval = std::stol(req.get_param_value("interval_ms"));
      if (req.has_param("max_events")) max_events = std::stoul(req.get_param_value("max_events"));
    } catch (const std::exception&) {
      throw Error(Errc::kInvalidArgument, "interval_ms and max_events must be integers");
    }
    if (interval < 100) {
      throw Error(Errc::kInvalidArgument, "refresh interval must be at least 100 ms", {{"interval_ms", interval}});
    }
    // Surface unknown sources and tables as a plain error response.
    platform.sources().read(spec.source_id, spec.table);

    auto queue = std::make_shared<EventQueue>();
    auto handle = std::shared_ptr<viz::RefreshHandle>(viz::stream_refresh(
        platform.sources(), spec, std::chrono::milliseconds(interval),
        [queue](const TableFrame& f) { queue->push("event: frame\ndata: " + frame_to_json(f).dump() + "\n\n"); },
        [queue](const Error& e) { queue->push("event: error\ndata: " + api_error_body(e).dump() + "\n\n"); }));
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [queue, handle, max_events, sent = std::size_t{0}](std::size_t, httplib::DataSink& sink) mutable {
          std::string event;
          {
            std::unique_lock lock(queue->mutex);
            if (!queue->cv.wait_for(lock, std::chrono::seconds(1), [&] { return !queue->events.empty(); })) {
              lock.unlock();
              // Comment lines keep idle connections alive and detect disconnects.
              if (!sink.write(": keepalive\n\n", 13)) {
                handle->cancel();
                return false;
              }
              return true;
            }
            event = std::move(queue->events.front());
            queue->events.pop_front();
          }
          if (!sink.write(event.data(), event.size())) {
            handle->cancel();
            return false;
          }
          if (max_events && ++sent >= max_events) {
            handle->cancel();
            sink.done();
          }
          return true;
        },
        [handle](bool) { handle->cancel(); });
  }));
}

Server::Server(Platform& platform, ServerConfig config)
    : impl_(std::make_unique<Impl>(platform, std::move(config))) {}

Server::~Server() { stop(); }

int Server::bind() {
  const auto& c = impl_->config;
  if (c.port == 0) {
    port_ = impl_->http.bind_to_any_port(c.host);
    if (port_ <= 0) throw Error(Errc::kBindError, "cannot bind " + c.host);
  } else {
    if (!impl_->http.bind_to_port(c.host, c.port)) {
      throw Error(Errc::kBindError, "cannot bind " + c.host + ":" + std::to_string(c.port),
                  {{"host", c.host}, {"port", c.port}});
    }
    port_ = c.port;
  }
  return port_;
}

void Server::serve() { impl_->http.listen_after_bind(); }

int Server::start() {
  int port = bind();
  thread_ = std::thread([this] { serve(); });
  impl_->http.wait_until_ready();
  return port;
}

void Server::stop() {
  impl_->http.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace flowforge
