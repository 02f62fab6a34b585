#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "flowforge/error.hpp"
#include "flowforge/operators/algorithms.hpp"

namespace flowforge::ops {
namespace {

double wcss(const std::vector<std::vector<double>>& points, const std::vector<std::size_t>& labels,
            const std::vector<std::vector<double>>& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    total += squared_distance(points[i], centroids[labels[i]]);
  }
  return total;
}

std::vector<std::size_t> assign(const std::vector<std::vector<double>>& points,
                                const std::vector<std::vector<double>>& centroids) {
  std::vector<std::size_t> labels(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) labels[i] = nearest_centroid(points[i], centroids);
  return labels;
}

std::size_t sample_weighted(const std::vector<double>& weights, double total, std::mt19937_64& rng) {
  double r = opt::unit_uniform(rng) * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    if (r < weights[i]) return i;
    r -= weights[i];
  }
  return last_positive;
}

// Greedy k-means++: each new centre is the best of several D^2-weighted
// candidates by resulting potential.
std::vector<std::vector<double>> seed_centroids(const std::vector<std::vector<double>>& points,
                                                std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  std::vector<std::vector<double>> centroids;
  centroids.push_back(points[rng() % n]);
  std::vector<double> closest(n);
  for (std::size_t i = 0; i < n; ++i) closest[i] = squared_distance(points[i], centroids[0]);
  while (centroids.size() < k) {
    double potential = 0.0;
    for (double d : closest) potential += d;
    std::size_t best = n;
    double best_potential = std::numeric_limits<double>::infinity();
    std::vector<double> best_closest;
    for (std::size_t t = 0; t < trials; ++t) {
      std::size_t candidate = sample_weighted(closest, potential, rng);
      std::vector<double> next(n);
      double next_potential = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        next[i] = std::min(closest[i], squared_distance(points[i], points[candidate]));
        next_potential += next[i];
      }
      if (next_potential < best_potential) {
        best_potential = next_potential;
        best = candidate;
        best_closest = std::move(next);
      }
    }
    centroids.push_back(points[best]);
    closest = std::move(best_closest);
  }
  return centroids;
}

}  // namespace

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest_centroid(std::span<const double> point,
                             const std::vector<std::vector<double>>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    double d = squared_distance(point, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

KMeansFit kmeans_fit(const std::vector<std::vector<double>>& points, const KMeansOptions& options) {
  if (options.k < 1) throw Error(Errc::kInvalidArgument, "k must be at least 1");
  std::set<std::vector<double>> distinct(points.begin(), points.end());
  if (options.k > distinct.size()) {
    throw Error(Errc::kKTooLarge,
                "k=" + std::to_string(options.k) + " exceeds the " + std::to_string(distinct.size()) +
                    " distinct feature vectors",
                {{"k", options.k}, {"distinct", distinct.size()}});
  }
  const std::size_t dim = points.front().size();
  std::mt19937_64 rng(options.seed);

  KMeansFit fit;
  fit.centroids = seed_centroids(points, options.k, rng);
  fit.labels = assign(points, fit.centroids);
  fit.wcss_history.push_back(wcss(points, fit.labels, fit.centroids));

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    std::vector<std::vector<double>> next(options.k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(options.k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& c = next[fit.labels[i]];
      for (std::size_t j = 0; j < dim; ++j) c[j] += points[i][j];
      ++counts[fit.labels[i]];
    }
    for (std::size_t c = 0; c < options.k; ++c) {
      if (counts[c] == 0) continue;
      for (auto& x : next[c]) x /= static_cast<double>(counts[c]);
    }
    auto labels = fit.labels;
    for (std::size_t c = 0; c < options.k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (counts[labels[i]] <= 1) continue;
        double d = squared_distance(points[i], next[labels[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      next[c] = points[far];
      --counts[labels[far]];
      labels[far] = c;
      counts[c] = 1;
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < options.k; ++c) {
      movement = std::max(movement, std::sqrt(squared_distance(next[c], fit.centroids[c])));
    }
    fit.centroids = std::move(next);
    auto reassigned = assign(points, fit.centroids);
    bool stable = reassigned == fit.labels;
    fit.labels = std::move(reassigned);
    fit.wcss_history.push_back(wcss(points, fit.labels, fit.centroids));
    fit.iterations = iter + 1;
    if (movement < options.tol && stable) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

std::vector<std::vector<double>> feature_matrix(const TableFrame& frame,
                                                std::span<const std::string> features) {
  std::vector<std::size_t> cols;
  for (const auto& f : features) {
    auto idx = frame.column_index(f);
    if (!is_numeric(frame.schema()[idx].dtype)) {
      throw Error(Errc::kNonNumericFeature, "feature '" + f + "' is not numeric", {{"column", f}});
    }
    cols.push_back(idx);
  }
  std::vector<std::vector<double>> points;
  points.reserve(frame.num_rows());
  for (const auto& row : frame.rows()) {
    std::vector<double> p;
    p.reserve(cols.size());
    for (auto c : cols) p.push_back(value_as_double(row[c]));
    points.push_back(std::move(p));
  }
  return points;
}

KMeansResult kmeans(const TableFrame& frame, std::span<const std::string> features,
                    const KMeansOptions& options) {
  if (features.empty()) throw Error(Errc::kInvalidArgument, "k-means needs at least one feature");
  auto points = feature_matrix(frame, features);
  if (points.empty()) throw Error(Errc::kEmptyFrame, "k-means needs a non-empty frame");
  KMeansResult result;
  result.fit = kmeans_fit(points, options);
  result.centroids.feature_names.assign(features.begin(), features.end());
  result.centroids.coordinates = result.fit.centroids;
  result.frame = frame;
  std::vector<Value> cluster;
  cluster.reserve(points.size());
  for (auto l : result.fit.labels) cluster.emplace_back(static_cast<std::int64_t>(l));
  result.frame.append_column({"cluster", DType::kInt}, std::move(cluster));
  return result;
}

TableFrame assign_clusters(const TableFrame& frame, const Centroids& centroids) {
  auto points = feature_matrix(frame, centroids.feature_names);
  TableFrame out = frame;
  std::vector<Value> cluster;
  cluster.reserve(points.size());
  for (const auto& p : points) {
    cluster.emplace_back(static_cast<std::int64_t>(nearest_centroid(p, centroids.coordinates)));
  }
  out.append_column({"cluster", DType::kInt}, std::move(cluster));
  return out;
}

}  // namespace flowforge::ops
