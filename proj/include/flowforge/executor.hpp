#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowforge/broker.hpp"
#include "flowforge/dsl.hpp"
#include "flowforge/operators/operator.hpp"
#include "flowforge/operators/table_store.hpp"
#include "flowforge/optimizer/space.hpp"

namespace flowforge {

enum class RunState { kDeploying, kRunning, kCompleted, kFailed, kUndeployed };
enum class NodeState { kPending, kRunning, kSucceeded, kFailed };

std::string_view run_state_name(RunState state);
std::string_view node_state_name(NodeState state);
std::optional<RunState> parse_run_state(std::string_view name);
std::optional<NodeState> parse_node_state(std::string_view name);

struct RunRecord {
  std::string run_id;
  std::string workflow_name;
  WorkflowMode mode = WorkflowMode::kBatch;
  RunState state = RunState::kDeploying;
  std::map<std::string, NodeState> node_states;
  std::map<std::string, std::string> node_errors;
  std::int64_t started_at_ms = 0;
  std::optional<std::int64_t> finished_at_ms;
  std::optional<nlohmann::json> deployment_config;  // assignment object
  std::optional<std::string> error;
};

struct NodeMetrics {
  double execution_time_ms = 0.0;
  std::int64_t records_in = 0;
  std::int64_t records_out = 0;
  std::optional<std::int64_t> started_at_ms;
  std::optional<std::int64_t> finished_at_ms;
};

struct RunMetrics {
  double execution_time_ms = 0.0;
  std::map<std::string, NodeMetrics> nodes;
};

/// One journaled transition; `node` is empty for run-level transitions.
struct StateEvent {
  std::int64_t ts_ms = 0;
  std::string node;
  std::string from;
  std::string to;
};

nlohmann::json run_to_json(const RunRecord& run);
nlohmann::json metrics_to_json(const RunMetrics& metrics);

namespace detail {
struct Run;
}

/// Deploys stream workflows as one worker thread per node wired through
/// broker topics, and runs batch workflows as DAGs with one thread per
/// ready node. Every state transition is appended to a JSONL journal, which
/// is replayed on construction.
class Executor {
 public:
  struct Options {
    /// Empty disables the journal.
    std::filesystem::path journal;
    /// Source poll interval when a stream source has nothing to emit.
    std::chrono::milliseconds idle_wait{5};
  };

  Executor(Broker& broker, TableStore& tables, Options options,
           const OperatorRegistry& registry = OperatorRegistry::builtins());
  ~Executor();
  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  /// Throws kInvalidWorkflow for batch input, kAlreadyDeployed when the
  /// workflow name has a live deployment, kOperatorInitError when a node
  /// cannot be instantiated or set up.
  std::string deploy_stream(const ValidatedWorkflow& vw,
                            const std::optional<opt::ConfigurationPoint>& config = std::nullopt);
  /// Stops the workers after their current batch. Throws kNotFound, kNotRunning.
  void undeploy(const std::string& run_id);
  /// Returns immediately; nodes run asynchronously. Unknown implementations
  /// throw kOperatorInitError before any run is recorded.
  std::string launch_task(const ValidatedWorkflow& vw,
                          const std::optional<opt::ConfigurationPoint>& config = std::nullopt);

  RunRecord get_run(const std::string& run_id) const;
  RunMetrics get_metrics(const std::string& run_id) const;
  std::vector<RunRecord> list_runs() const;
  std::vector<StateEvent> events(const std::string& run_id) const;
  /// Run id of the live deployment of a stream workflow, if any.
  std::optional<std::string> live_stream(const std::string& workflow_name) const;

  /// Blocks until a batch run reaches a terminal state or the timeout passes.
  RunRecord wait(const std::string& run_id, std::chrono::milliseconds timeout) const;
  /// Blocks until every stream source is exhausted and every consumer has
  /// processed all upstream messages. False on timeout or when the run stops.
  bool wait_drained(const std::string& run_id, std::chrono::milliseconds timeout) const;

 private:
  std::shared_ptr<detail::Run> find(const std::string& run_id) const;
  std::shared_ptr<detail::Run> create_run(const ValidatedWorkflow& vw,
                                          const std::optional<opt::ConfigurationPoint>& config);
  void set_run_state(detail::Run& run, RunState state, std::optional<std::string> error = std::nullopt);
  void set_node_state(detail::Run& run, const std::string& node, NodeState state,
                      std::optional<std::string> error = std::nullopt);
  void journal(const nlohmann::json& line);
  void replay();
  void run_stream_source(std::shared_ptr<detail::Run> run, std::size_t index);
  void run_stream_node(std::shared_ptr<detail::Run> run, std::size_t index);
  void run_batch(std::shared_ptr<detail::Run> run);
  void fail_stream(detail::Run& run, std::size_t index, const std::string& cause);

  Broker& broker_;
  TableStore& tables_;
  Options options_;
  const OperatorRegistry& registry_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<detail::Run>> runs_;
  std::size_t next_id_ = 1;
  std::mutex journal_mutex_;
  std::ofstream journal_out_;
};

}  // namespace flowforge
