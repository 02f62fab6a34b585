#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "flowforge/optimizer/executors.hpp"

namespace flowforge::opt {

/// k-nearest-neighbour performance classifier over normalized points with
/// inverse-distance weights 1 / (1e-9 + dist).
struct SurrogateModel {
  std::vector<std::vector<double>> points;
  std::vector<bool> improved;
  std::vector<double> ratios;
  double default_metric_ms = 0.0;
  std::size_t k = 5;
};

struct Prediction {
  double p_improved = 0.0;
  double predicted_ratio = 0.0;

  /// Search score: p_improved * max(predicted_ratio, 0).
  double score() const;
};

/// Throws kTooFewSamples when fewer than k samples are given.
SurrogateModel train_surrogate(std::span<const PerformanceSample> samples, double default_metric_ms,
                               std::size_t k = 5);

/// Neighbours are ranked by distance, ties by training order.
Prediction predict(const SurrogateModel& model, std::span<const double> normalized);
Prediction predict(const SurrogateModel& model, const ConfigurationPoint& point);

nlohmann::json prediction_to_json(const Prediction& p);

}  // namespace flowforge::opt
