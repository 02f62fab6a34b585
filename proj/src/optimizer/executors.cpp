#include "flowforge/optimizer/executors.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "flowforge/error.hpp"
#include "flowforge/operators/algorithms.hpp"

namespace flowforge::opt {

using nlohmann::json;

PerformanceSample make_sample(ConfigurationPoint point, double metric_ms, double default_metric_ms) {
  PerformanceSample s;
  s.point = std::move(point);
  s.metric_ms = metric_ms;
  s.improved = metric_ms < default_metric_ms;
  s.improvement_ratio = (default_metric_ms - metric_ms) / default_metric_ms;
  return s;
}

json sample_to_json(const PerformanceSample& s) {
  return {{"point", assignment_to_json(s.point.assignment)},
          {"normalized", s.point.normalized},
          {"metric_ms", s.metric_ms},
          {"improved", s.improved},
          {"improvement_ratio", s.improvement_ratio}};
}

PerformanceSample sample_from_json(const ParameterSpace& space, const json& j) {
  PerformanceSample s;
  s.point = point_from_json(space, j.at("point"));
  s.metric_ms = j.at("metric_ms").get<double>();
  s.improved = j.at("improved").get<bool>();
  s.improvement_ratio = j.at("improvement_ratio").get<double>();
  return s;
}

double simulated_cost_ms(const ConfigurationPoint& c) {
  double slots = static_cast<double>(c.get_int("executor_instances") * c.get_int("executor_cores"));
  double base = 100.0 / std::min(slots, 24.0);
  double ser = c.get_string("serializer") == "java" ? 1.25 : 1.0;
  double memory = static_cast<double>(c.get_int("executor_memory_mb"));
  double mem = 1.0 + std::max(0.0, (2048.0 - memory) / 2048.0) * 1.5;
  double partitions = static_cast<double>(c.get_int("shuffle_partitions"));
  double shuf = 1.0 + 0.1 * std::abs(std::log2(partitions) - 6.0) * (c.get_bool("compress") ? 0.7 : 1.0);
  return 50.0 + 1000.0 * base * ser * mem * shuf;
}

SimulatedCostExecutor::SimulatedCostExecutor(double sigma, std::uint64_t seed)
    : sigma_(sigma), seed_(seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(Errc::kInvalidArgument, "sigma must be a non-negative number");
  }
}

double SimulatedCostExecutor::execute(const ConfigurationPoint& point) {
  double cost = simulated_cost_ms(point);
  if (sigma_ == 0.0) return cost;
  auto key = assignment_to_json(point.assignment).dump();
  std::mt19937_64 rng(seed_ ^ std::hash<std::string>{}(key));
  std::normal_distribution<double> g(0.0, 1.0);
  return std::max(0.0, cost * (1.0 + sigma_ * g(rng)));
}

json SimulatedCostExecutor::describe() const {
  return {{"kind", "simulated"}, {"sigma", sigma_}, {"seed", seed_}};
}

DerivativeWorkloadExecutor::DerivativeWorkloadExecutor(std::size_t n, std::size_t reps)
    : n_(n), reps_(reps) {
  if (n < 3 || reps < 1) throw Error(Errc::kInvalidSize, "derivative workload needs n >= 3 and reps >= 1");
}

double DerivativeWorkloadExecutor::execute(const ConfigurationPoint& point) {
  return ops::derivative_workload(n_, reps_, point).duration_ms;
}

json DerivativeWorkloadExecutor::describe() const {
  return {{"kind", "derivative"}, {"n", n_}, {"reps", reps_}};
}

std::shared_ptr<WorkloadExecutor> make_executor(const json& j) {
  if (!j.is_object()) throw Error(Errc::kInvalidArgument, "executor must be an object");
  auto kind = j.value("kind", std::string("simulated"));
  try {
    if (kind == "simulated") {
      return std::make_shared<SimulatedCostExecutor>(j.value("sigma", 0.0), j.value("seed", std::uint64_t{0}));
    }
    if (kind == "derivative") {
      return std::make_shared<DerivativeWorkloadExecutor>(j.value("n", std::size_t{200000}),
                                                          j.value("reps", std::size_t{5}));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("malformed executor: ") + e.what());
  }
  throw Error(Errc::kInvalidArgument, "unknown executor kind '" + kind + "'", {{"kind", kind}});
}

PerformanceSample run_workload(const ConfigurationPoint& point, WorkloadExecutor& executor,
                               double default_metric_ms) {
  double metric = 0.0;
  try {
    metric = executor.execute(point);
  } catch (const std::exception& e) {
    throw Error(Errc::kExecutorError, std::string("workload execution failed: ") + e.what(),
                {{"point", assignment_to_json(point.assignment)}});
  }
  if (!std::isfinite(metric) || metric < 0.0) {
    throw Error(Errc::kExecutorError, "workload returned an invalid metric");
  }
  return make_sample(point, metric, default_metric_ms);
}

}  // namespace flowforge::opt
