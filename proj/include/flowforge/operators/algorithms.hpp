#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowforge/frame.hpp"
#include "flowforge/optimizer/space.hpp"

namespace flowforge::ops {

// --- string indexer ---------------------------------------------------------

/// Distinct labels ordered by descending frequency, ties by ascending label.
/// Position in the result is the label's index.
std::vector<std::string> rank_labels(std::span<const std::string> labels);

/// Appends `<c>_idx` (int) for every named string column; rank 0 is the most
/// frequent label. Throws kColumnNotFound, kColumnTypeError, kEmptyFrame.
TableFrame string_indexer(const TableFrame& frame, std::span<const std::string> columns);

// --- k-means -----------------------------------------------------------------

struct Centroids {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> coordinates;  // k x d

  std::size_t k() const { return coordinates.size(); }
};

struct KMeansOptions {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  double tol = 1e-6;
};

struct KMeansFit {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> labels;
  /// Within-cluster sum of squares after every assignment step.
  std::vector<double> wcss_history;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Lloyd's algorithm with greedy k-means++ seeding. Stops once the largest
/// centroid move is below tol and assignments are stable, or at max_iter.
/// An emptied cluster is reseeded at the point farthest from its centroid.
/// Throws kKTooLarge when k exceeds the number of distinct points.
KMeansFit kmeans_fit(const std::vector<std::vector<double>>& points, const KMeansOptions& options);

std::size_t nearest_centroid(std::span<const double> point,
                             const std::vector<std::vector<double>>& centroids);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// Reads numeric feature columns, ints widened to double.
std::vector<std::vector<double>> feature_matrix(const TableFrame& frame,
                                                std::span<const std::string> features);

struct KMeansResult {
  TableFrame frame;  // input plus a `cluster` int column
  Centroids centroids;
  KMeansFit fit;
};

KMeansResult kmeans(const TableFrame& frame, std::span<const std::string> features,
                    const KMeansOptions& options);

/// Appends the `cluster` column using fixed centroids.
TableFrame assign_clusters(const TableFrame& frame, const Centroids& centroids);

// --- cluster summary --------------------------------------------------------

/// One row per cluster id (ascending): cluster, count, pct, and mean_<col> for
/// every other numeric column.
TableFrame cluster_summary(const TableFrame& frame, std::string_view cluster_column);

// --- derivative workload ----------------------------------------------------

/// Central differences (x[i+1] - x[i-1]) / 2h for interior points.
std::vector<double> central_differences(std::span<const double> x, double h);

struct WorkloadResult {
  double duration_ms = 0.0;
  double checksum = 0.0;
  std::size_t workers = 1;
};

/// Samples x[i] = sin(i/n) and recomputes the interior central differences
/// `reps` times across `workers` threads. The checksum is summed serially so
/// it does not depend on the worker count. Throws kInvalidSize.
WorkloadResult derivative_workload(std::size_t n, std::size_t reps, std::size_t workers);

/// min(executor_instances * executor_cores, hardware threads), at least 1.
std::size_t workload_workers(const opt::ConfigurationPoint& config);

WorkloadResult derivative_workload(std::size_t n, std::size_t reps,
                                   const opt::ConfigurationPoint& config);

}  // namespace flowforge::ops
