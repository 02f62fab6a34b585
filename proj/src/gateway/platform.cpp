#include "flowforge/gateway/platform.hpp"

#include <fstream>
#include <regex>

#include "flowforge/error.hpp"

namespace flowforge {

using nlohmann::json;

namespace {

std::filesystem::path ensure_dir(const std::filesystem::path& p) {
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

Platform::Platform(std::filesystem::path data_dir)
    : data_dir_(ensure_dir(data_dir)),
      catalogue_(data_dir_ / "catalogue.jsonl"),
      tables_(data_dir_ / "tables") {
  for (const auto& d : builtin_descriptors()) {
    try {
      catalogue_.get_service(d.name, d.version);
    } catch (const Error&) {
      catalogue_.register_service(d);
    }
  }
  load_workflows();
  executor_ = std::make_unique<Executor>(broker_, tables_, Executor::Options{data_dir_ / "runs.jsonl"});
  optimizer_ = std::make_unique<opt::OptimizerJobs>(broker_, data_dir_ / "optimizer");
  sources_ = std::make_unique<viz::SourceRegistry>(tables_, broker_, data_dir_ / "viz_sources.json");
}

Platform::~Platform() {
  // Workers reference the broker and table store, so they stop first.
  executor_.reset();
  optimizer_.reset();
}

CatalogueEntryId Platform::register_service(const ServiceDescriptor& descriptor) {
  return catalogue_.register_service(descriptor);
}

void Platform::unregister_service(const std::string& name, const std::string& version) {
  std::lock_guard lock(definitions_mutex_);
  catalogue_.unregister_service(name, version, [&](const std::string& n, const std::string& v) {
    for (const auto& [wf, def] : definitions_) {
      for (const auto& node : def.nodes) {
        if (node.service == n && (!node.version || *node.version == v)) return true;
      }
    }
    return false;
  });
}

WorkflowDefinition Platform::create_workflow(const std::string& name, const std::string& dsl_text,
                                             WorkflowMode mode) {
  static const std::regex name_re("[A-Za-z0-9][A-Za-z0-9_.-]{0,127}");
  if (!std::regex_match(name, name_re)) {
    throw Error(Errc::kInvalidArgument, "workflow names use letters, digits, '_', '.' and '-'", {{"name", name}});
  }
  auto def = dsl::parse(dsl_text, mode, name);
  std::lock_guard lock(definitions_mutex_);
  if (definitions_.count(name)) {
    throw Error(Errc::kDuplicateWorkflow, "workflow '" + name + "' already exists", {{"name", name}});
  }
  dsl::validate(def, catalogue_);
  definitions_[name] = def;
  save_workflows();
  return def;
}

std::vector<WorkflowDefinition> Platform::list_workflows(WorkflowMode mode) const {
  std::lock_guard lock(definitions_mutex_);
  std::vector<WorkflowDefinition> out;
  for (const auto& [name, def] : definitions_) {
    if (def.mode == mode) out.push_back(def);
  }
  return out;
}

WorkflowDefinition Platform::get_workflow(const std::string& name, WorkflowMode mode) const {
  std::lock_guard lock(definitions_mutex_);
  auto it = definitions_.find(name);
  if (it == definitions_.end() || it->second.mode != mode) {
    throw Error(Errc::kNotFound, std::string(mode == WorkflowMode::kStream ? "stream" : "task") + " not found: " + name,
                {{"name", name}});
  }
  return it->second;
}

void Platform::delete_workflow(const std::string& name, WorkflowMode mode) {
  get_workflow(name, mode);
  if (mode == WorkflowMode::kStream) {
    if (auto live = executor_->live_stream(name)) {
      throw Error(Errc::kInUse, "stream '" + name + "' is deployed as " + *live, {{"run_id", *live}});
    }
  }
  std::lock_guard lock(definitions_mutex_);
  definitions_.erase(name);
  save_workflows();
}

ValidatedWorkflow Platform::revalidate(const std::string& name, WorkflowMode mode) const {
  auto def = get_workflow(name, mode);
  return dsl::validate(def, catalogue_);
}

std::optional<opt::ConfigurationPoint> Platform::parse_config(const std::optional<json>& config) const {
  if (!config || config->is_null()) return std::nullopt;
  auto space = opt::spark_like_space();
  // Partial assignments are completed from the space defaults.
  auto full = opt::assignment_to_json(space.default_point().assignment);
  const auto& given = config->contains("assignment") ? (*config)["assignment"] : *config;
  if (!given.is_object()) throw Error(Errc::kInvalidSpace, "deployment config must be an object");
  for (const auto& [k, v] : given.items()) full[k] = v;
  return opt::point_from_json(space, full);
}

std::string Platform::deploy_stream(const std::string& name, const std::optional<json>& config) {
  auto point = parse_config(config);
  return executor_->deploy_stream(revalidate(name, WorkflowMode::kStream), point);
}

std::string Platform::undeploy_stream(const std::string& name) {
  get_workflow(name, WorkflowMode::kStream);
  auto live = executor_->live_stream(name);
  if (!live) throw Error(Errc::kNotRunning, "stream '" + name + "' is not deployed", {{"name", name}});
  executor_->undeploy(*live);
  return *live;
}

std::string Platform::launch_task(const std::string& name, const std::optional<json>& config) {
  auto point = parse_config(config);
  return executor_->launch_task(revalidate(name, WorkflowMode::kBatch), point);
}

void Platform::save_workflows() const {
  json out = json::array();
  for (const auto& [name, def] : definitions_) out.push_back(definition_to_json(def));
  auto path = data_dir_ / "workflows.json";
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    f << out.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

void Platform::load_workflows() {
  auto path = data_dir_ / "workflows.json";
  if (!std::filesystem::exists(path)) return;
  try {
    std::ifstream in(path);
    for (const auto& j : json::parse(in)) {
      auto def = definition_from_json(j);
      definitions_[def.name] = def;
    }
  } catch (const std::exception&) {
    // An unreadable store starts empty rather than blocking startup.
  }
}

}  // namespace flowforge
