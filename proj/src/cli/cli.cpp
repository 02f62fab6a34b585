#include "flowforge/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <regex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

namespace flowforge::cli {

using nlohmann::json;

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  if (!in) return out;
  static const std::regex kLine(R"re(^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?:"((?:[^"\\]|\\.)*)"|'([^']*)')\s*(#.*)?$)re");
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_match(line, m, kLine)) continue;
    std::string value = m[2].matched ? m[2].str() : m[3].str();
    if (m[2].matched) {
      std::string unescaped;
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (value[i] == '\\' && i + 1 < value.size()) ++i;
        unescaped += value[i];
      }
      value = unescaped;
    }
    out[m[1].str()] = value;
  }
  return out;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Endpoint {
  std::string host;
  int port = 80;
};

Endpoint parse_endpoint(const std::string& url) {
  static const std::regex kUrl(R"(^http://([A-Za-z0-9.\-]+)(?::([0-9]{1,5}))?/?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw UsageError("endpoint must look like http://host[:port], got '" + url + "'");
  Endpoint e{m[1].str(), m[2].matched ? std::stoi(m[2].str()) : 80};
  if (e.port < 1 || e.port > 65535) throw UsageError("endpoint port out of range");
  return e;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_arg(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    throw UsageError(what + " is not valid JSON");
  }
}

std::string url_encode(const std::string& s) {
  std::ostringstream out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out << c;
    } else {
      out << '%' << std::uppercase << std::hex << std::setw(2) << std::setfill('0') << int(c) << std::dec;
    }
  }
  return out.str();
}

std::string cell(const json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void print_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i + 1 == r.size()) {
        out << r[i];
      } else {
        out << std::left << std::setw(static_cast<int>(width[i]) + 2) << r[i];
      }
    }
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

void print_frame(std::ostream& out, const json& frame) {
  std::vector<std::string> header;
  for (const auto& c : frame["schema"]) header.push_back(c["name"].get<std::string>());
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : frame["rows"]) {
    std::vector<std::string> row;
    for (const auto& v : r) row.push_back(cell(v));
    rows.push_back(std::move(row));
  }
  print_table(out, header, rows);
}

class Session {
 public:
  Session(const CliConfig& config, std::ostream& out, std::ostream& err)
      : config_(config), out_(out), err_(err) {
    auto ep = parse_endpoint(config.endpoint);
    client_ = std::make_unique<httplib::Client>(ep.host, ep.port);
    client_->set_connection_timeout(5);
    client_->set_read_timeout(120);
    if (config.token) client_->set_bearer_token_auth(*config.token);
  }

  bool json_mode() const { return config_.output == "json"; }
  std::ostream& out() { return out_; }

  /// Returns the parsed body on 2xx; prints the error and returns nullopt otherwise.
  std::optional<json> call(const std::string& method, const std::string& path, const json* body = nullptr,
                           bool echo = true) {
    httplib::Result res;
    std::string payload = body ? body->dump() : "";
    if (method == "GET") {
      res = client_->Get(path);
    } else if (method == "DELETE") {
      res = client_->Delete(path);
    } else {
      res = client_->Post(path, payload, "application/json");
    }
    if (!res) {
      err_ << "error: cannot reach " << config_.endpoint << " (" << httplib::to_string(res.error()) << ")\n";
      return std::nullopt;
    }
    if (res->status >= 400) {
      if (json_mode()) out_ << res->body;
      std::string message = "HTTP " + std::to_string(res->status);
      try {
        auto j = json::parse(res->body);
        if (j.is_object() && j.contains("message")) message = j["message"].get<std::string>();
      } catch (const json::exception&) {
      }
      err_ << "error: " << message << '\n';
      return std::nullopt;
    }
    if (echo && json_mode()) out_ << res->body;
    if (res->body.empty()) return json(nullptr);
    try {
      return json::parse(res->body);
    } catch (const json::exception&) {
      err_ << "error: server sent a non-JSON body\n";
      return std::nullopt;
    }
  }

 private:
  CliConfig config_;
  std::ostream& out_;
  std::ostream& err_;
  std::unique_ptr<httplib::Client> client_;
};

bool terminal_run_state(const std::string& s) {
  return s == "completed" || s == "failed" || s == "undeployed";
}

bool terminal_job_state(const std::string& s) { return s == "succeeded" || s == "failed"; }

// Polls until `done` holds; returns the last body or nullopt on error.
std::optional<json> poll_until(Session& s, const std::string& path, const std::function<bool(const json&)>& done) {
  for (;;) {
    auto body = s.call("GET", path, nullptr, false);
    if (!body || done(*body)) return body;
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
}

void print_run(std::ostream& out, const json& r) {
  out << "run_id:    " << cell(r["run_id"]) << '\n'
      << "workflow:  " << cell(r["workflow_name"]) << " (" << cell(r["mode"]) << ")\n"
      << "state:     " << cell(r["state"]) << '\n';
  if (!r["error"].is_null()) out << "error:     " << cell(r["error"]) << '\n';
  std::vector<std::vector<std::string>> rows;
  for (const auto& [node, state] : r["node_states"].items()) {
    std::string error = r["node_errors"].contains(node) ? cell(r["node_errors"][node]) : "";
    rows.push_back({node, cell(state), error});
  }
  if (!rows.empty()) {
    out << '\n';
    print_table(out, {"NODE", "STATE", "ERROR"}, rows);
  }
}

void print_report(std::ostream& out, const json& r) {
  out << "job_id:     " << cell(r["job_id"]) << '\n'
      << "state:      " << cell(r["state"]) << '\n'
      << "stage:      " << cell(r["stage"]) << '\n';
  if (!r["error"].is_null()) out << "error:      " << r["error"].dump() << '\n';
  if (!r["default_metric_ms"].is_null()) out << "default_ms: " << cell(r["default_metric_ms"]) << '\n';
  if (!r["recommended"].is_null()) out << "recommended: " << r["recommended"].dump() << '\n';
  if (!r["measured"].is_null()) {
    out << "measured_ms: " << cell(r["measured"]["metric_ms"])
        << "  improvement_ratio: " << cell(r["measured"]["improvement_ratio"]) << '\n';
  }
}

struct Options {
  std::string endpoint, token, output;

  std::string file, name, version, dsl, config_json, spec_json, id;
  std::string kind, tag, query, workflow, state;
  std::string location, delimiter;
  bool no_header = false, destroy = false, wait = false;
  int window = 0;
};

json spec_from(const Options& o, const std::string& what) {
  if (!o.spec_json.empty()) return parse_json_arg(o.spec_json, what);
  if (!o.file.empty()) return parse_json_arg(read_file(o.file), what);
  throw UsageError(what + " needs --spec JSON or -f FILE");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"flowforge command-line client", "flowforge"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--endpoint", o.endpoint, "Gateway URL, e.g. http://127.0.0.1:8080");
  app.add_option("--token", o.token, "Bearer token");
  app.add_option("-o,--output", o.output, "Output format")->check(CLI::IsMember({"table", "json"}));

  auto* service = app.add_subcommand("service", "Service catalogue")->require_subcommand(1);
  auto* svc_register = service->add_subcommand("register", "Register a service descriptor");
  svc_register->add_option("-f,--file", o.file, "Descriptor JSON file")->required();
  auto* svc_list = service->add_subcommand("list", "List services");
  svc_list->add_option("--kind", o.kind);
  svc_list->add_option("--tag", o.tag);
  svc_list->add_option("-q,--query", o.query);
  auto* svc_get = service->add_subcommand("get", "Show a service");
  svc_get->add_option("name", o.name)->required();
  svc_get->add_option("version", o.version);
  auto* svc_rm = service->add_subcommand("rm", "Unregister a service version");
  svc_rm->add_option("name", o.name)->required();
  svc_rm->add_option("version", o.version)->required();

  auto* stream = app.add_subcommand("stream", "Stream workflows")->require_subcommand(1);
  auto* stream_create = stream->add_subcommand("create", "Create a stream from DSL text");
  stream_create->add_option("name", o.name)->required();
  stream_create->add_option("dsl", o.dsl, "DSL text");
  stream_create->add_option("-f,--file", o.file, "DSL file");
  auto* stream_deploy = stream->add_subcommand("deploy", "Deploy a stream");
  stream_deploy->add_option("name", o.name)->required();
  stream_deploy->add_option("--config", o.config_json, "Deployment configuration JSON");
  auto* stream_undeploy = stream->add_subcommand("undeploy", "Undeploy a stream");
  stream_undeploy->add_option("name", o.name)->required();
  stream_undeploy->add_flag("--destroy", o.destroy, "Also delete the definition");
  auto* stream_list = stream->add_subcommand("list", "List streams");

  auto* task = app.add_subcommand("task", "Batch workflows")->require_subcommand(1);
  auto* task_create = task->add_subcommand("create", "Create a task from DSL text");
  task_create->add_option("name", o.name)->required();
  task_create->add_option("dsl", o.dsl, "DSL text");
  task_create->add_option("-f,--file", o.file, "DSL file");
  auto* task_launch = task->add_subcommand("launch", "Launch a task");
  task_launch->add_option("name", o.name)->required();
  task_launch->add_option("--config", o.config_json, "Deployment configuration JSON");
  task_launch->add_flag("--wait", o.wait, "Wait for the run to finish");

  auto* runs = app.add_subcommand("run", "Runs")->require_subcommand(1);
  auto* run_list = runs->add_subcommand("list", "List runs");
  run_list->add_option("--workflow", o.workflow);
  run_list->add_option("--state", o.state);
  auto* run_get = runs->add_subcommand("get", "Show a run");
  run_get->add_option("id", o.id)->required();
  auto* run_metrics = runs->add_subcommand("metrics", "Show run metrics");
  run_metrics->add_option("id", o.id)->required();

  auto* optimize = app.add_subcommand("optimize", "Deployment optimizer")->require_subcommand(1);
  auto* opt_run = optimize->add_subcommand("run", "Start an optimizer job");
  opt_run->add_option("-f,--file", o.file, "Job spec JSON file");
  opt_run->add_option("--spec", o.spec_json, "Job spec JSON");
  opt_run->add_flag("--wait", o.wait, "Wait for the job to finish");
  auto* opt_status = optimize->add_subcommand("status", "Show an optimizer job");
  opt_status->add_option("id", o.id)->required();

  auto* viz = app.add_subcommand("viz", "Data exploration")->require_subcommand(1);
  auto* viz_sources = viz->add_subcommand("sources", "List sources, or add one with --kind");
  viz_sources->add_option("--kind", o.kind, "delimited-file, jsonl-file or stream-topic");
  viz_sources->add_option("--location", o.location);
  viz_sources->add_option("--delimiter", o.delimiter);
  viz_sources->add_flag("--no-header", o.no_header);
  viz_sources->add_option("--window", o.window);
  auto* viz_tables = viz->add_subcommand("tables", "List a source's tables");
  viz_tables->add_option("source", o.id)->required();
  auto* viz_query = viz->add_subcommand("query", "Run a query spec");
  viz_query->add_option("-f,--file", o.file, "Query spec JSON file");
  viz_query->add_option("--spec", o.spec_json, "Query spec JSON");
  auto* viz_recommend = viz->add_subcommand("recommend", "Recommend charts for a query result");
  viz_recommend->add_option("-f,--file", o.file, "Query spec JSON file");
  viz_recommend->add_option("--spec", o.spec_json, "Query spec JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  // Precedence: flags, then FLOWFORGE_* variables, then the config file.
  std::map<std::string, std::string> file;
  if (auto path = env("FLOWFORGE_CONFIG")) {
    file = read_config_file(*path);
  } else if (auto home = env("HOME")) {
    file = read_config_file(*home + "/.flowforge.toml");
  }
  auto pick = [&](const std::string& flag, std::initializer_list<const char*> vars,
                  const char* key) -> std::optional<std::string> {
    if (!flag.empty()) return flag;
    for (const char* v : vars) {
      if (auto value = env(v); value && !value->empty()) return value;
    }
    if (auto it = file.find(key); it != file.end()) return it->second;
    return std::nullopt;
  };
  CliConfig config;
  if (auto v = pick(o.endpoint, {"FLOWFORGE_ENDPOINT"}, "endpoint")) config.endpoint = *v;
  config.token = pick(o.token, {"FLOWFORGE_TOKEN", "FLOWFORGE_AUTH_TOKEN"}, "token");
  if (auto v = pick(o.output, {"FLOWFORGE_OUTPUT"}, "output")) config.output = *v;
  if (config.output != "table" && config.output != "json") {
    err << "usage error: output must be table or json\n";
    return kUsage;
  }

  try {
    Session s(config, out, err);
    const bool table = !s.json_mode();
    auto done = [](bool ok) { return ok ? kOk : kApiFailure; };

    if (svc_register->parsed()) {
      auto body = parse_json_arg(read_file(o.file), "descriptor file");
      auto r = s.call("POST", "/api/services", &body);
      if (r && table) out << "registered " << cell((*r)["name"]) << ' ' << cell((*r)["version"]) << '\n';
      return done(r.has_value());
    }
    if (svc_list->parsed()) {
      std::string path = "/api/services";
      std::string sep = "?";
      for (auto [k, v] : {std::pair{"kind", &o.kind}, {"tag", &o.tag}, {"q", &o.query}}) {
        if (!v->empty()) {
          path += sep + k + "=" + url_encode(*v);
          sep = "&";
        }
      }
      auto r = s.call("GET", path);
      if (r && table) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& d : *r) {
          rows.push_back({cell(d["name"]), cell(d["version"]), cell(d["kind"]), cell(d["framework"])});
        }
        print_table(out, {"NAME", "VERSION", "KIND", "FRAMEWORK"}, rows);
      }
      return done(r.has_value());
    }
    if (svc_get->parsed()) {
      std::string path = "/api/services/" + url_encode(o.name);
      if (!o.version.empty()) path += "/" + url_encode(o.version);
      auto r = s.call("GET", path);
      if (r && table) out << r->dump(2) << '\n';
      return done(r.has_value());
    }
    if (svc_rm->parsed()) {
      auto r = s.call("DELETE", "/api/services/" + url_encode(o.name) + "/" + url_encode(o.version));
      if (r && table) out << "removed " << o.name << ' ' << o.version << '\n';
      return done(r.has_value());
    }

    auto create = [&](const std::string& base, const char* noun) {
      if (o.dsl.empty() == o.file.empty()) throw UsageError("give the DSL either inline or with -f, not both");
      json body = {{"name", o.name}, {"dsl", o.file.empty() ? o.dsl : read_file(o.file)}};
      auto r = s.call("POST", base, &body);
      if (r && table) out << "created " << noun << ' ' << cell((*r)["name"]) << '\n';
      return done(r.has_value());
    };
    auto config_body = [&]() {
      json body = json::object();
      if (!o.config_json.empty()) body["config"] = parse_json_arg(o.config_json, "--config");
      return body;
    };

    if (stream_create->parsed()) return create("/api/streams", "stream");
    if (stream_deploy->parsed()) {
      auto body = config_body();
      auto r = s.call("POST", "/api/streams/" + url_encode(o.name) + "/deploy", &body);
      if (r && table) out << cell((*r)["run_id"]) << '\n';
      return done(r.has_value());
    }
    if (stream_undeploy->parsed()) {
      std::string path = "/api/streams/" + url_encode(o.name);
      if (o.destroy) path += "?destroy=true";
      auto r = s.call("DELETE", path);
      if (r && table) {
        if (!(*r)["run_id"].is_null()) out << "undeployed " << cell((*r)["run_id"]) << '\n';
        if (o.destroy) out << "deleted stream " << o.name << '\n';
      }
      return done(r.has_value());
    }
    if (stream_list->parsed()) {
      auto r = s.call("GET", "/api/streams");
      if (r && table) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& w : *r) rows.push_back({cell(w["name"]), cell(w["deployed_run"]), cell(w["dsl"])});
        print_table(out, {"NAME", "DEPLOYED_RUN", "DSL"}, rows);
      }
      return done(r.has_value());
    }
    if (task_create->parsed()) return create("/api/tasks", "task");
    if (task_launch->parsed()) {
      auto body = config_body();
      auto r = s.call("POST", "/api/tasks/" + url_encode(o.name) + "/launch", &body, !o.wait);
      if (!r) return kApiFailure;
      std::string run_id = (*r)["run_id"];
      if (!o.wait) {
        if (table) out << run_id << '\n';
        return kOk;
      }
      auto fin = poll_until(s, "/api/runs/" + run_id,
                            [](const json& j) { return terminal_run_state(j["state"].get<std::string>()); });
      if (!fin) return kApiFailure;
      if (table) {
        print_run(out, *fin);
      } else {
        out << fin->dump();
      }
      return (*fin)["state"] == "completed" ? kOk : kApiFailure;
    }

    if (run_list->parsed()) {
      std::string path = "/api/runs";
      std::string sep = "?";
      if (!o.workflow.empty()) {
        path += sep + "workflow=" + url_encode(o.workflow);
        sep = "&";
      }
      if (!o.state.empty()) path += sep + "state=" + url_encode(o.state);
      auto r = s.call("GET", path);
      if (r && table) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& x : *r) {
          rows.push_back({cell(x["run_id"]), cell(x["workflow_name"]), cell(x["mode"]), cell(x["state"])});
        }
        print_table(out, {"RUN", "WORKFLOW", "MODE", "STATE"}, rows);
      }
      return done(r.has_value());
    }
    if (run_get->parsed()) {
      auto r = s.call("GET", "/api/runs/" + url_encode(o.id));
      if (r && table) print_run(out, *r);
      return done(r.has_value());
    }
    if (run_metrics->parsed()) {
      auto r = s.call("GET", "/api/runs/" + url_encode(o.id) + "/metrics");
      if (r && table) {
        out << "execution_time_ms: " << cell((*r)["execution_time_ms"]) << "\n\n";
        std::vector<std::vector<std::string>> rows;
        for (const auto& [node, m] : (*r)["nodes"].items()) {
          rows.push_back({node, cell(m["records_in"]), cell(m["records_out"]), cell(m["execution_time_ms"])});
        }
        print_table(out, {"NODE", "IN", "OUT", "TIME_MS"}, rows);
      }
      return done(r.has_value());
    }

    if (opt_run->parsed()) {
      json body = o.spec_json.empty() && o.file.empty() ? json::object() : spec_from(o, "job spec");
      auto r = s.call("POST", "/api/optimizer/jobs", &body, !o.wait);
      if (!r) return kApiFailure;
      std::string job_id = (*r)["job_id"];
      if (!o.wait) {
        if (table) out << job_id << '\n';
        return kOk;
      }
      auto fin = poll_until(s, "/api/optimizer/jobs/" + job_id,
                            [](const json& j) { return terminal_job_state(j["state"].get<std::string>()); });
      if (!fin) return kApiFailure;
      if (table) {
        print_report(out, *fin);
      } else {
        out << fin->dump();
      }
      return (*fin)["state"] == "succeeded" ? kOk : kApiFailure;
    }
    if (opt_status->parsed()) {
      auto r = s.call("GET", "/api/optimizer/jobs/" + url_encode(o.id));
      if (r && table) print_report(out, *r);
      return done(r.has_value());
    }

    if (viz_sources->parsed()) {
      if (o.kind.empty()) {
        auto r = s.call("GET", "/api/viz/sources");
        if (r && table) {
          std::vector<std::vector<std::string>> rows;
          for (const auto& x : *r) rows.push_back({cell(x["id"]), cell(x["kind"]), cell(x["location"])});
          print_table(out, {"ID", "KIND", "LOCATION"}, rows);
        }
        return done(r.has_value());
      }
      json options = json::object();
      if (!o.delimiter.empty()) options["delimiter"] = o.delimiter;
      if (o.no_header) options["header"] = false;
      if (o.window > 0) options["window"] = o.window;
      json body = {{"kind", o.kind}, {"location", o.location}, {"options", options}};
      auto r = s.call("POST", "/api/viz/sources", &body);
      if (r && table) out << cell((*r)["id"]) << '\n';
      return done(r.has_value());
    }
    if (viz_tables->parsed()) {
      auto r = s.call("GET", "/api/viz/sources/" + url_encode(o.id) + "/tables");
      if (r && table) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& t : *r) {
          std::string cols;
          for (const auto& c : t["columns"]) {
            if (!cols.empty()) cols += ", ";
            cols += cell(c["name"]) + ":" + cell(c["dtype"]);
          }
          rows.push_back({cell(t["name"]), cell(t["row_count"]), cols});
        }
        print_table(out, {"TABLE", "ROWS", "COLUMNS"}, rows);
      }
      return done(r.has_value());
    }
    if (viz_query->parsed()) {
      auto body = spec_from(o, "query spec");
      auto r = s.call("POST", "/api/viz/query", &body);
      if (r && table) print_frame(out, *r);
      return done(r.has_value());
    }
    if (viz_recommend->parsed()) {
      auto body = spec_from(o, "query spec");
      auto r = s.call("POST", "/api/viz/recommend", &body);
      if (r && table) {
        std::vector<std::vector<std::string>> rows;
        int rank = 1;
        for (const auto& c : *r) {
          rows.push_back({std::to_string(rank++), cell(c["chart_type"]), cell(c["score"]), c["encoding"].dump(),
                          cell(c["reason"])});
        }
        print_table(out, {"RANK", "CHART", "SCORE", "ENCODING", "REASON"}, rows);
      }
      return done(r.has_value());
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }
  err << "usage error: no command\n";
  return kUsage;
}

}  // namespace flowforge::cli
