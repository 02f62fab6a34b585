#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "flowforge/broker.hpp"
#include "flowforge/optimizer/executors.hpp"
#include "flowforge/optimizer/rrs.hpp"
#include "flowforge/optimizer/surrogate.hpp"

namespace flowforge::opt {

struct OptimizerJobSpec {
  ParameterSpace space = spark_like_space();
  std::size_t training_n = 200;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  RrsParams rrs;
  /// Concurrent workload executions in stage 2; 0 means the core count.
  std::size_t parallelism = 0;
  nlohmann::json executor = {{"kind", "simulated"}};
};

/// Accepts {space?, training_n?, k?, seed?, parallelism?, rrs?, executor?}.
/// rrs.seed defaults to the job seed.
OptimizerJobSpec job_spec_from_json(const nlohmann::json& j);
nlohmann::json job_spec_to_json(const OptimizerJobSpec& spec);

enum class JobState { kPending, kRunning, kSucceeded, kFailed };
std::string_view job_state_name(JobState state);

struct OptimizationReport {
  std::string job_id;
  JobState state = JobState::kPending;
  std::string stage;  // stage currently running, or the failing one
  std::optional<nlohmann::json> error;
  OptimizerJobSpec spec;
  std::optional<double> default_metric_ms;
  std::vector<PerformanceSample> samples;
  std::vector<TraceEntry> trace;
  std::optional<ConfigurationPoint> recommended;
  std::optional<Prediction> predicted;
  std::optional<PerformanceSample> measured;
  std::int64_t created_at_ms = 0;
  std::optional<std::int64_t> finished_at_ms;
};

nlohmann::json report_to_json(const OptimizationReport& report);
OptimizationReport report_from_json(const nlohmann::json& j);

inline constexpr const char* kStageTunings = "tunings";
inline constexpr const char* kStageSamples = "samples";
inline constexpr const char* kStageModel = "model";
inline constexpr const char* kStageResult = "result";

/// Runs random tunings, workload executions, classifier training and the
/// surrogate search as four workers joined only by broker topics
/// opt.<job>.{tunings,samples,model,result}, then validates the
/// recommendation with one real execution. `on_stage` sees each stage name
/// as it starts. A failing stage raises its error with details.stage set.
OptimizationReport optimize_job(const OptimizerJobSpec& spec, WorkloadExecutor& executor,
                                Broker& broker, const std::string& job_id,
                                const std::function<void(const std::string&)>& on_stage = {});

/// Asynchronous jobs with reports persisted as <dir>/<job_id>.json.
class OptimizerJobs {
 public:
  OptimizerJobs(Broker& broker, std::filesystem::path dir);
  ~OptimizerJobs();
  OptimizerJobs(const OptimizerJobs&) = delete;
  OptimizerJobs& operator=(const OptimizerJobs&) = delete;

  /// Validates the spec and executor synchronously, then returns the new id.
  std::string start(const OptimizerJobSpec& spec);
  /// Throws kNotFound.
  OptimizationReport get(const std::string& job_id) const;
  std::vector<OptimizationReport> list() const;
  /// Blocks until the job leaves pending/running or the timeout passes.
  OptimizationReport wait(const std::string& job_id, std::chrono::milliseconds timeout) const;

 private:
  void persist(const OptimizationReport& report) const;

  Broker& broker_;
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::map<std::string, OptimizationReport> reports_;
  std::vector<std::thread> threads_;
  std::size_t next_id_ = 1;
};

}  // namespace flowforge::opt
