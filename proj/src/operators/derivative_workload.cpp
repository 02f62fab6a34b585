#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "flowforge/error.hpp"
#include "flowforge/operators/algorithms.hpp"

namespace flowforge::ops {

std::vector<double> central_differences(std::span<const double> x, double h) {
  if (x.size() < 3) throw Error(Errc::kInvalidSize, "central differences need at least 3 samples");
  std::vector<double> d(x.size() - 2);
  const double inv = 1.0 / (2.0 * h);
  for (std::size_t i = 1; i + 1 < x.size(); ++i) d[i - 1] = (x[i + 1] - x[i - 1]) * inv;
  return d;
}

WorkloadResult derivative_workload(std::size_t n, std::size_t reps, std::size_t workers) {
  if (n < 3) throw Error(Errc::kInvalidSize, "workload size n must be at least 3", {{"n", n}});
  if (reps < 1) throw Error(Errc::kInvalidSize, "workload reps must be at least 1", {{"reps", reps}});
  workers = std::clamp<std::size_t>(workers, 1, n - 2);

  const double h = 1.0 / static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(static_cast<double>(i) * h);
  std::vector<double> d(n - 2);
  const double inv = 1.0 / (2.0 * h);

  auto start = std::chrono::steady_clock::now();
  auto run_chunk = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = 0; r < reps; ++r) {
      for (std::size_t i = begin; i < end; ++i) d[i - 1] = (x[i + 1] - x[i - 1]) * inv;
      // Keeps repeated passes from being folded into one.
      std::atomic_signal_fence(std::memory_order_seq_cst);
    }
  };
  const std::size_t interior = n - 2;
  if (workers == 1) {
    run_chunk(1, n - 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t begin = 1 + interior * w / workers;
      std::size_t end = 1 + interior * (w + 1) / workers;
      pool.emplace_back(run_chunk, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  auto elapsed = std::chrono::steady_clock::now() - start;

  WorkloadResult result;
  result.duration_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  result.workers = workers;
  for (double v : d) result.checksum += v;
  return result;
}

std::size_t workload_workers(const opt::ConfigurationPoint& config) {
  std::int64_t slots = config.get_int("executor_instances") * config.get_int("executor_cores");
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max<std::int64_t>(slots, 1)), hw));
}

WorkloadResult derivative_workload(std::size_t n, std::size_t reps,
                                   const opt::ConfigurationPoint& config) {
  return derivative_workload(n, reps, workload_workers(config));
}

}  // namespace flowforge::ops
