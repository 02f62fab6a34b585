#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowforge/broker.hpp"
#include "flowforge/catalogue.hpp"
#include "flowforge/dsl.hpp"
#include "flowforge/executor.hpp"
#include "flowforge/operators/table_store.hpp"
#include "flowforge/optimizer/job.hpp"
#include "flowforge/smartviz.hpp"

namespace flowforge {

/// Everything the gateway serves, rooted at one data directory:
///   catalogue.jsonl, workflows.json, runs.jsonl, tables/, optimizer/,
///   viz_sources.json.
class Platform {
 public:
  explicit Platform(std::filesystem::path data_dir);
  ~Platform();
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  const std::filesystem::path& data_dir() const { return data_dir_; }
  Catalogue& catalogue() { return catalogue_; }
  Broker& broker() { return broker_; }
  TableStore& tables() { return tables_; }
  Executor& executor() { return *executor_; }
  opt::OptimizerJobs& optimizer() { return *optimizer_; }
  viz::SourceRegistry& sources() { return *sources_; }

  CatalogueEntryId register_service(const ServiceDescriptor& descriptor);
  /// Throws kInUse while any stored workflow references the version. A node
  /// without a pinned version references every version of its service.
  void unregister_service(const std::string& name, const std::string& version);

  /// Parses and validates, then stores. Throws kDuplicateWorkflow when the
  /// name is taken by a stream or a task.
  WorkflowDefinition create_workflow(const std::string& name, const std::string& dsl_text, WorkflowMode mode);
  std::vector<WorkflowDefinition> list_workflows(WorkflowMode mode) const;
  /// Throws kNotFound when no workflow of that mode has the name.
  WorkflowDefinition get_workflow(const std::string& name, WorkflowMode mode) const;
  /// Throws kInUse while a stream is deployed.
  void delete_workflow(const std::string& name, WorkflowMode mode);

  std::string deploy_stream(const std::string& name, const std::optional<nlohmann::json>& config = std::nullopt);
  /// Returns the undeployed run id. Throws kNotRunning when not deployed.
  std::string undeploy_stream(const std::string& name);
  std::string launch_task(const std::string& name, const std::optional<nlohmann::json>& config = std::nullopt);

 private:
  ValidatedWorkflow revalidate(const std::string& name, WorkflowMode mode) const;
  std::optional<opt::ConfigurationPoint> parse_config(const std::optional<nlohmann::json>& config) const;
  void save_workflows() const;
  void load_workflows();

  std::filesystem::path data_dir_;
  Catalogue catalogue_;
  Broker broker_;
  TableStore tables_;
  std::unique_ptr<Executor> executor_;
  std::unique_ptr<opt::OptimizerJobs> optimizer_;
  std::unique_ptr<viz::SourceRegistry> sources_;
  mutable std::mutex definitions_mutex_;
  std::map<std::string, WorkflowDefinition> definitions_;
};

}  // namespace flowforge
