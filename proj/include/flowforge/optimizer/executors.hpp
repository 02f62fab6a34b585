#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <json.hpp>

#include "flowforge/optimizer/space.hpp"

namespace flowforge::opt {

/// One labeled measurement, compared against the default point's metric.
struct PerformanceSample {
  ConfigurationPoint point;
  double metric_ms = 0.0;
  bool improved = false;
  double improvement_ratio = 0.0;
};

PerformanceSample make_sample(ConfigurationPoint point, double metric_ms, double default_metric_ms);

nlohmann::json sample_to_json(const PerformanceSample& sample);
PerformanceSample sample_from_json(const ParameterSpace& space, const nlohmann::json& j);

/// Runs the category workload under a deployment configuration and reports
/// its execution time. Implementations must be callable from several
/// threads at once.
class WorkloadExecutor {
 public:
  virtual ~WorkloadExecutor() = default;
  virtual double execute(const ConfigurationPoint& point) = 0;
  virtual nlohmann::json describe() const = 0;
};

/// Noise-free cost of the Spark-like stand-in surface, in milliseconds.
double simulated_cost_ms(const ConfigurationPoint& point);

/// Cost surface with optional multiplicative noise (1 + sigma * g). The
/// standard normal g is drawn from a generator seeded by the seed and the
/// point, so results do not depend on evaluation order.
class SimulatedCostExecutor : public WorkloadExecutor {
 public:
  explicit SimulatedCostExecutor(double sigma = 0.0, std::uint64_t seed = 0);
  double execute(const ConfigurationPoint& point) override;
  nlohmann::json describe() const override;

 private:
  double sigma_;
  std::uint64_t seed_;
};

/// Times the real derivative workload; workers follow the point's
/// executor_instances * executor_cores.
class DerivativeWorkloadExecutor : public WorkloadExecutor {
 public:
  DerivativeWorkloadExecutor(std::size_t n, std::size_t reps);
  double execute(const ConfigurationPoint& point) override;
  nlohmann::json describe() const override;

 private:
  std::size_t n_;
  std::size_t reps_;
};

/// {"kind":"simulated","sigma":..,"seed":..} or {"kind":"derivative","n":..,"reps":..}.
std::shared_ptr<WorkloadExecutor> make_executor(const nlohmann::json& j);

/// Measures the point, wrapping any failure as kExecutorError.
PerformanceSample run_workload(const ConfigurationPoint& point, WorkloadExecutor& executor,
                               double default_metric_ms);

}  // namespace flowforge::opt
