#include "flowforge/optimizer/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowforge/error.hpp"

namespace flowforge::opt {

double Prediction::score() const { return p_improved * std::max(predicted_ratio, 0.0); }

SurrogateModel train_surrogate(std::span<const PerformanceSample> samples, double default_metric_ms,
                               std::size_t k) {
  if (k == 0) throw Error(Errc::kInvalidArgument, "k must be at least 1");
  if (samples.size() < k) {
    throw Error(Errc::kTooFewSamples,
                "need at least " + std::to_string(k) + " samples, got " + std::to_string(samples.size()),
                {{"k", k}, {"samples", samples.size()}});
  }
  SurrogateModel m;
  m.default_metric_ms = default_metric_ms;
  m.k = k;
  for (const auto& s : samples) {
    m.points.push_back(s.point.normalized);
    m.improved.push_back(s.improved);
    m.ratios.push_back(s.improvement_ratio);
  }
  return m;
}

Prediction predict(const SurrogateModel& model, std::span<const double> x) {
  if (model.points.empty()) throw Error(Errc::kTooFewSamples, "model has no training samples");
  std::vector<double> dist(model.points.size());
  for (std::size_t i = 0; i < model.points.size(); ++i) {
    const auto& p = model.points[i];
    if (p.size() != x.size()) throw Error(Errc::kInvalidArgument, "dimension mismatch");
    double s = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d) s += (p[d] - x[d]) * (p[d] - x[d]);
    dist[i] = std::sqrt(s);
  }
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t k = std::min(model.k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; });
  if (k == 1) {
    auto i = order.front();
    return {model.improved[i] ? 1.0 : 0.0, model.ratios[i]};
  }
  double total = 0.0, hit = 0.0, ratio = 0.0;
  for (std::size_t n = 0; n < k; ++n) {
    auto i = order[n];
    double w = 1.0 / (1e-9 + dist[i]);
    total += w;
    if (model.improved[i]) hit += w;
    ratio += w * model.ratios[i];
  }
  return {hit / total, ratio / total};
}

Prediction predict(const SurrogateModel& model, const ConfigurationPoint& point) {
  return predict(model, point.normalized);
}

nlohmann::json prediction_to_json(const Prediction& p) {
  return {{"p_improved", p.p_improved}, {"predicted_ratio", p.predicted_ratio}, {"score", p.score()}};
}

}  // namespace flowforge::opt
